#include "tractoform/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tractoform/detail/binary_io.hpp"
#include "tractoform/error.hpp"

namespace tractoform {

AttentionStack::AttentionStack(std::size_t layers, std::size_t heads, std::size_t grid, std::size_t resolution,
                               std::vector<double> weights)
    : layers_(layers), heads_(heads), tokens_(grid * grid + 1), grid_(grid), resolution_(resolution),
      weights_(std::move(weights)) {
    if (layers_ == 0 || heads_ == 0 || grid_ == 0) throw InvalidArgument("attention stack needs L, H, G >= 1");
    if (resolution_ == 0 || resolution_ % grid_ != 0)
        throw InvalidArgument("attention stack: resolution " + std::to_string(resolution_) +
                              " is not a multiple of the patch grid " + std::to_string(grid_));
    if (weights_.size() != layers_ * heads_ * tokens_ * tokens_)
        throw InvalidArgument("attention stack: expected L*H*N*N = " + std::to_string(layers_ * heads_ * tokens_ * tokens_) +
                              " weights, got " + std::to_string(weights_.size()));
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> AttentionStack::matrix(
    std::size_t layer, std::size_t head) const {
    const auto n = tokens_;
    const double* base = weights_.data() + (layer * heads_ + head) * n * n;
    return {base, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)};
}

namespace {

void check_stochastic(const Eigen::Ref<const Eigen::MatrixXd>& m, const std::string& where) {
    if (!m.allFinite() || (m.array() < 0.0).any())
        throw InvalidArgument("malformed attention: " + where + " has negative or non-finite weights");
    const double worst = (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
    if (worst > kMalformedAttentionTolerance)
        throw InvalidArgument("malformed attention: " + where + " rows deviate from 1 by " + std::to_string(worst));
}

}  // namespace

Eigen::MatrixXd joint_attention(std::span<const Eigen::MatrixXd> layers, RolloutOrder order) {
    if (layers.empty()) throw InvalidArgument("joint_attention: no layers");
    const auto n = layers.front().rows();
    Eigen::MatrixXd joint = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].rows() != n || layers[l].cols() != n)
            throw InvalidArgument("joint_attention: layer " + std::to_string(l) + " is not " + std::to_string(n) + " x " +
                                  std::to_string(n));
        check_stochastic(layers[l], "layer " + std::to_string(l));
        Eigen::MatrixXd layer = layers[l] + Eigen::MatrixXd::Identity(n, n);
        layer = layer.array().colwise() / layer.rowwise().sum().array();
        joint = order == RolloutOrder::FirstToLast ? Eigen::MatrixXd(layer * joint) : Eigen::MatrixXd(joint * layer);
    }
    return joint;
}

Eigen::MatrixXd rollout_matrix(const AttentionStack& stack, RolloutOrder order) {
    const auto n = static_cast<Eigen::Index>(stack.tokens());
    std::vector<Eigen::MatrixXd> means;
    for (std::size_t l = 0; l < stack.layers(); ++l) {
        Eigen::MatrixXd layer = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t h = 0; h < stack.heads(); ++h) {
            check_stochastic(stack.matrix(l, h), "layer " + std::to_string(l) + " head " + std::to_string(h));
            layer += stack.matrix(l, h);
        }
        means.push_back(layer / static_cast<double>(stack.heads()));
    }
    return joint_attention(means, order);
}

Grid rollout(const AttentionStack& stack, RolloutOrder order) {
    const auto joint = rollout_matrix(stack, order);
    const auto g = static_cast<Eigen::Index>(stack.grid());
    Grid scores(g, g);
    for (Eigen::Index p = 0; p < g * g; ++p) scores(p / g, p % g) = joint(0, p + 1);
    return scores;
}

AttentionMap upsample(const Grid& patch_scores, std::size_t resolution) {
    const auto g = static_cast<std::size_t>(patch_scores.rows());
    if (g == 0 || patch_scores.cols() != patch_scores.rows()) throw InvalidArgument("upsample: patch scores must be square");
    if (resolution % g != 0)
        throw InvalidArgument("upsample: resolution " + std::to_string(resolution) + " is not a multiple of " +
                              std::to_string(g));
    const auto block = static_cast<Eigen::Index>(resolution / g);
    const auto side = static_cast<Eigen::Index>(resolution);
    AttentionMap map(side, side);
    for (Eigen::Index r = 0; r < side; ++r)
        for (Eigen::Index c = 0; c < side; ++c) map(r, c) = patch_scores(r / block, c / block);
    return map;
}

ThresholdResult threshold(const AttentionMap& map) {
    if (map.size() == 0) throw InvalidArgument("threshold: empty map");
    const double count = static_cast<double>(map.size());
    const double mean = map.sum() / count;
    const double variance = (map.array() - mean).square().sum() / count;
    ThresholdResult out;
    out.value = mean + 2.0 * std::sqrt(variance);
    for (Eigen::Index r = 0; r < map.rows(); ++r)
        for (Eigen::Index c = 0; c < map.cols(); ++c)
            if (map(r, c) > out.value) out.pixels.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)});
    return out;
}

DiscriminativeSet backproject(const ThresholdResult& selection, const FiberPixelMap& map, std::size_t channel,
                              const FiberBundle& bundle) {
    if (channel >= map.channels()) throw InvalidArgument("backproject: channel " + std::to_string(channel) + " out of range");
    const auto side = map.resolution();
    std::vector<char> selected(side * side, 0);
    for (const auto& p : selection.pixels) {
        if (p.row >= side || p.col >= side)
            throw InvalidArgument("backproject: pixel (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                                  ") out of range for resolution " + std::to_string(side));
        selected[p.row * side + p.col] = 1;
    }

    DiscriminativeSet out{selection.value, selection.pixels, {}};
    for (const auto& e : map.entries(channel)) {
        if (!bundle.index_of(e.id))
            throw InvalidArgument("backproject: mapped fiber " + std::to_string(e.id) + " is not in the bundle");
        if (selected[e.pixel.row * side + e.pixel.col]) out.fiber_ids.push_back(e.id);
    }
    return out;  // map entries are id-ascending already
}

AttentionMap groupwise_map(std::span<const AttentionMap> maps) {
    if (maps.empty()) throw InvalidArgument("groupwise_map: no maps");
    AttentionMap sum = AttentionMap::Zero(maps[0].rows(), maps[0].cols());
    for (const auto& m : maps) {
        if (m.rows() != sum.rows() || m.cols() != sum.cols()) throw InvalidArgument("groupwise_map: shape mismatch");
        sum += m;
    }
    return sum / static_cast<double>(maps.size());
}

AttentionStack read_tfat(const std::string& path) {
    detail::BinaryReader in(path, "TFAT");
    in.expect_magic("TFAT");
    in.expect_version(1);
    const auto layers = in.get<std::uint32_t>();
    const auto heads = in.get<std::uint32_t>();
    const auto tokens = in.get<std::uint32_t>();
    const auto grid = in.get<std::uint32_t>();
    const auto resolution = in.get<std::uint32_t>();
    if (layers == 0 || heads == 0 || grid == 0 || layers > 1024 || heads > 1024 || grid > 4096)
        in.fail("invalid header");
    if (static_cast<std::uint64_t>(grid) * grid + 1 != tokens)
        in.fail("token count " + std::to_string(tokens) + " != G*G + 1 for G = " + std::to_string(grid));
    if (resolution == 0 || resolution % grid != 0) in.fail("resolution not a multiple of the patch grid");

    std::vector<double> weights(static_cast<std::size_t>(layers) * heads * tokens * tokens);
    for (auto& w : weights) w = in.get<float>();
    in.expect_end();
    return AttentionStack(layers, heads, grid, resolution, std::move(weights));
}

void write_tfat(const std::string& path, const AttentionStack& stack) {
    detail::BinaryWriter out(path);
    out.magic("TFAT");
    out.put<std::uint32_t>(1);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.layers()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.heads()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.tokens()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.grid()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.resolution()));
    for (double w : stack.weights()) out.put<float>(static_cast<float>(w));
    out.close();
}

}  // namespace tractoform
