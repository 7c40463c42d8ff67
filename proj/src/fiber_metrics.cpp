#include "tractoform/fiber_metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "tractoform/detail/binary_io.hpp"
#include "tractoform/error.hpp"
#include "tractoform/parallel.hpp"

namespace tractoform {

namespace {

double directed_mean_closest(std::span<const Point3> from, std::span<const Point3> to) {
    double sum = 0.0;
    for (const auto& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
        sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
}

template <typename Entry>
Eigen::MatrixXd fill_matrix(const FiberBundle& a, const FiberBundle& b, Entry entry) {
    if (a.empty() || b.empty()) throw InvalidArgument("pairwise: empty fiber set");
    Eigen::MatrixXd m(a.size(), b.size());
    parallel_for(a.size(), [&](std::size_t i) {
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = entry(a[i], b[j]);
    });
    return m;
}

}  // namespace

double mcp_distance(const Streamline& a, const Streamline& b) {
    if (a.size() != b.size())
        throw InvalidArgument("mcp_distance: point counts differ (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + "); resample first");
    const double ab = directed_mean_closest(a.points(), b.points());
    const double ba = directed_mean_closest(b.points(), a.points());
    return 0.5 * (ab + ba);
}

double affinity(double distance, double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("affinity: sigma must be > 0");
    const double r = distance / sigma;
    return std::exp(-r * r);
}

AffinityMatrix pairwise(const FiberBundle& a, const FiberBundle& b, double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("affinity: sigma must be > 0");
    return {fill_matrix(a, b, [sigma](const Streamline& x, const Streamline& y) { return affinity(mcp_distance(x, y), sigma); }),
            sigma};
}

AffinityMatrix pairwise(const FiberBundle& a, double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("affinity: sigma must be > 0");
    if (a.empty()) throw InvalidArgument("pairwise: empty fiber set");
    // upper triangle only; mcp_distance is symmetric by construction
    const auto n = a.size();
    Eigen::MatrixXd m(n, n);
    parallel_for(n, [&](std::size_t i) {
        m(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) m(i, j) = affinity(mcp_distance(a[i], a[j]), sigma);
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) m(i, j) = m(j, i);
    return {std::move(m), sigma};
}

DistanceMatrix distance_matrix(const FiberBundle& a, const FiberBundle& b) {
    return {fill_matrix(a, b, [](const Streamline& x, const Streamline& y) { return mcp_distance(x, y); })};
}

double mpfd(std::span<const Streamline> fibers) {
    if (fibers.size() < 2) throw InvalidArgument("mpfd: undefined for singleton (needs >= 2 fibers)");
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < fibers.size(); ++i)
        for (std::size_t j = i + 1; j < fibers.size(); ++j) {
            sum += mcp_distance(fibers[i], fibers[j]);
            ++pairs;
        }
    return sum / static_cast<double>(pairs);
}

void write_matrix(const std::string& path, const Eigen::MatrixXd& values, double sigma) {
    detail::BinaryWriter out(path);
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        for (Eigen::Index j = 0; j < values.cols(); ++j) out.put<double>(values(i, j));
    out.close();

    std::ofstream sidecar(path + ".json");
    if (!sidecar) throw Error("cannot write '" + path + ".json'");
    sidecar << nlohmann::json{{"rows", values.rows()}, {"cols", values.cols()}, {"sigma", sigma}}.dump(2) << '\n';
}

}  // namespace tractoform
