#include "tractoform/tracto_image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "tractoform/error.hpp"
#include "tractoform/fiber_metrics.hpp"
#include "tractoform/parallel.hpp"
#include "tractoform/random.hpp"

namespace tractoform {

AggregationStat parse_stat(std::string_view name) {
    if (name == "mean") return AggregationStat::Mean;
    if (name == "max") return AggregationStat::Max;
    if (name == "min") return AggregationStat::Min;
    if (name == "count") return AggregationStat::Count;
    throw InvalidArgument("unknown aggregation statistic '" + std::string(name) + "' (expected mean, max, min or count)");
}

std::string_view to_string(AggregationStat stat) {
    switch (stat) {
        case AggregationStat::Mean: return "mean";
        case AggregationStat::Max: return "max";
        case AggregationStat::Min: return "min";
        case AggregationStat::Count: return "count";
    }
    return "?";
}

FiberPixelMap::FiberPixelMap(std::size_t channels, std::size_t resolution)
    : resolution_(resolution), entries_(channels) {}

void FiberPixelMap::add(std::size_t channel, FiberId id, PixelIndex pixel) {
    auto& list = entries_.at(channel);
    if (pixel.row >= resolution_ || pixel.col >= resolution_)
        throw InvalidArgument("pixel (" + std::to_string(pixel.row) + ", " + std::to_string(pixel.col) +
                              ") outside the " + std::to_string(resolution_) + " grid");
    if (!list.empty() && list.back().id >= id) throw InvalidArgument("fiber pixel map ids must be strictly ascending");
    list.push_back({id, pixel});
}

std::optional<PixelIndex> FiberPixelMap::pixel_of(std::size_t channel, FiberId id) const {
    const auto& list = entries_.at(channel);
    const auto it = std::lower_bound(list.begin(), list.end(), id, [](const Entry& e, FiberId v) { return e.id < v; });
    if (it == list.end() || it->id != id) return std::nullopt;
    return it->pixel;
}

std::vector<FiberId> FiberPixelMap::fibers_at(std::size_t channel, PixelIndex pixel) const {
    std::vector<FiberId> out;
    for (const auto& e : entries_.at(channel))
        if (e.pixel == pixel) out.push_back(e.id);
    return out;
}

Grid FiberPixelMap::occupancy(std::size_t channel) const {
    Grid counts = Grid::Zero(static_cast<Eigen::Index>(resolution_), static_cast<Eigen::Index>(resolution_));
    for (const auto& e : entries_.at(channel)) counts(e.pixel.row, e.pixel.col) += 1.0;
    return counts;
}

bool operator==(const FiberPixelMap& a, const FiberPixelMap& b) {
    if (a.resolution_ != b.resolution_ || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t c = 0; c < a.entries_.size(); ++c) {
        const auto& x = a.entries_[c];
        const auto& y = b.entries_[c];
        if (x.size() != y.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i].id != y[i].id || x[i].pixel != y[i].pixel) return false;
    }
    return true;
}

namespace {

std::uint32_t bin(double c, const CoordRange& r, std::size_t resolution) {
    const double clamped = std::clamp(c, r.min, r.max);
    const double t = (clamped - r.min) / (r.max - r.min);
    const auto idx = static_cast<std::size_t>(std::floor(t * static_cast<double>(resolution)));
    return static_cast<std::uint32_t>(std::min(idx, resolution - 1));
}

void check_grid(std::span<const CoordRange> ranges, std::size_t resolution) {
    if (resolution < 2) throw InvalidArgument("grid resolution must be >= 2");
    if (ranges.size() < 2) throw InvalidArgument("need ranges for the first two embedding dimensions");
    if (ranges[0].degenerate() || ranges[1].degenerate()) throw InvalidArgument("degenerate embedding space (min == max)");
}

// Rasterise fibers [0, n) of `bundle` into one channel; row i of coords belongs
// to fiber i.
void rasterize_into(const FiberBundle& bundle, const EmbeddingCoords& coords, std::span<const CoordRange> ranges,
                    std::size_t resolution, std::string_view feature, AggregationStat stat, Grid& pixels,
                    FiberPixelMap& map, std::size_t channel) {
    if (coords.size() != bundle.size()) throw InvalidArgument("rasterize: coordinate rows do not match the bundle");
    std::span<const double> values;
    if (stat != AggregationStat::Count) {
        // an empty part of a split carries no feature arrays
        if (!bundle.empty())
            values = bundle.features().get(feature);
        else if (feature != FiberFeatures::kMeanFa && feature != FiberFeatures::kMeanMd)
            throw InvalidArgument("unknown feature '" + std::string(feature) + "'");
    }

    const auto pixels_of = discretize(coords, ranges, resolution);
    const auto side = static_cast<Eigen::Index>(resolution);
    pixels = Grid::Zero(side, side);
    Grid hits = Grid::Zero(side, side);

    std::vector<std::size_t> order(bundle.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bundle[a].id() < bundle[b].id(); });

    for (auto i : order) {
        const auto [r, c] = pixels_of[i];
        map.add(channel, bundle[i].id(), pixels_of[i]);
        double& px = pixels(r, c);
        const bool first = hits(r, c) == 0.0;
        hits(r, c) += 1.0;
        switch (stat) {
            case AggregationStat::Mean: px += values[i]; break;
            case AggregationStat::Max: px = first ? values[i] : std::max(px, values[i]); break;
            case AggregationStat::Min: px = first ? values[i] : std::min(px, values[i]); break;
            case AggregationStat::Count: px += 1.0; break;
        }
    }
    if (stat == AggregationStat::Mean)
        for (Eigen::Index r = 0; r < side; ++r)
            for (Eigen::Index c = 0; c < side; ++c)
                if (hits(r, c) > 0.0) pixels(r, c) /= hits(r, c);
}

TractoImage image_from_parts(const HemisphereSplit& split, const std::array<EmbeddingCoords, kChannelCount>& coords,
                             std::span<const CoordRange> ranges, const ImageOptions& options) {
    TractoImage image;
    image.resolution = options.resolution;
    image.feature = options.feature;
    image.stat = options.stat;
    image.fiber_pixel_map = FiberPixelMap(kChannelCount, options.resolution);
    image.channels.resize(kChannelCount);
    for (std::size_t c = 0; c < kChannelCount; ++c)
        rasterize_into(split[static_cast<Hemisphere>(c)], coords[c], ranges, options.resolution, options.feature,
                       options.stat, image.channels[c], image.fiber_pixel_map, c);
    return image;
}

void check_options(const FiberBundle& bundle, const EmbeddingSpace& space, const ImageOptions& options) {
    check_grid(space.ranges(options.scaling), options.resolution);
    if (options.stat != AggregationStat::Count) (void)bundle.features().get(options.feature);
}

EmbeddingCoords select_rows(const EmbeddingCoords& coords, std::span<const std::size_t> rows) {
    EmbeddingCoords out;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), coords.values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.ids.push_back(coords.ids[rows[i]]);
        out.values.row(static_cast<Eigen::Index>(i)) = coords.values.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

}  // namespace

std::vector<PixelIndex> discretize(const EmbeddingCoords& coords, std::span<const CoordRange> ranges, std::size_t resolution) {
    check_grid(ranges, resolution);
    if (coords.dims() < 2) throw InvalidArgument("discretize: need at least two embedding dimensions");
    std::vector<PixelIndex> out(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        out[i] = {bin(coords.values(row, 0), ranges[0], resolution), bin(coords.values(row, 1), ranges[1], resolution)};
    }
    return out;
}

TractoImage rasterize(const FiberBundle& bundle, const EmbeddingCoords& coords, std::span<const CoordRange> ranges,
                      std::size_t resolution, std::string_view feature, AggregationStat stat) {
    check_grid(ranges, resolution);
    TractoImage image;
    image.resolution = resolution;
    image.feature = std::string(feature);
    image.stat = stat;
    image.fiber_pixel_map = FiberPixelMap(1, resolution);
    image.channels.resize(1);
    rasterize_into(bundle, coords, ranges, resolution, feature, stat, image.channels[0], image.fiber_pixel_map, 0);
    return image;
}

TractoImage make_image(const FiberBundle& bundle, const EmbeddingSpace& space, const ImageOptions& options) {
    check_options(bundle, space, options);
    const auto split = split_by_hemisphere(bundle, options.hemisphere_tolerance);
    std::array<EmbeddingCoords, kChannelCount> coords;
    for (std::size_t c = 0; c < kChannelCount; ++c) coords[c] = embed(space, split[static_cast<Hemisphere>(c)], options.scaling);
    return image_from_parts(split, coords, space.ranges(options.scaling), options);
}

std::vector<TractoImage> augment(const FiberBundle& bundle, const EmbeddingSpace& space, const ImageOptions& options,
                                 const AugmentOptions& augment_options) {
    if (!(augment_options.fraction > 0.0 && augment_options.fraction <= 1.0))
        throw InvalidArgument("augment: fraction must be in (0, 1]");
    if (augment_options.count < 1) throw InvalidArgument("augment: count must be >= 1");
    const auto sample_size =
        static_cast<std::size_t>(std::floor(augment_options.fraction * static_cast<double>(bundle.size())));
    if (sample_size == 0) throw InvalidArgument("augment: sample size floor(fraction * N) is 0");
    check_options(bundle, space, options);

    // Out-of-sample coordinates depend only on the fiber and the landmarks, so
    // the whole bundle is embedded once and every sample reuses its rows.
    const auto full = embed(space, bundle, options.scaling);
    const auto ranges = space.ranges(options.scaling);

    std::vector<TractoImage> images(augment_options.count);
    parallel_for(augment_options.count, [&](std::size_t i) {
        Rng rng(derive_seed(augment_options.seed, "augment", i));
        const auto rows = sample_without_replacement(bundle.size(), sample_size, rng);
        const auto sample = bundle.subset(rows);
        const auto sample_coords = select_rows(full, rows);

        std::vector<std::size_t> parts[kChannelCount];
        for (std::size_t r = 0; r < sample.size(); ++r)
            parts[static_cast<std::size_t>(classify_hemisphere(sample[r], options.hemisphere_tolerance))].push_back(r);
        const HemisphereSplit split{sample.subset(parts[0]), sample.subset(parts[1]), sample.subset(parts[2])};
        std::array<EmbeddingCoords, kChannelCount> coords;
        for (std::size_t c = 0; c < kChannelCount; ++c) coords[c] = select_rows(sample_coords, parts[c]);
        images[i] = image_from_parts(split, coords, ranges, options);
    });
    return images;
}

MpfdReport voxel_mpfd_report(const TractoImage& image, const FiberBundle& bundle) {
    const auto& map = image.fiber_pixel_map;
    const auto side = map.resolution();
    MpfdReport report;
    double total = 0.0;
    for (std::size_t c = 0; c < map.channels(); ++c) {
        std::vector<std::vector<std::size_t>> members(side * side);
        for (const auto& e : map.entries(c)) {
            const auto idx = bundle.index_of(e.id);
            if (!idx) throw InvalidArgument("voxel_mpfd_report: fiber " + std::to_string(e.id) + " not in bundle");
            members[e.pixel.row * side + e.pixel.col].push_back(*idx);
        }
        for (std::size_t p = 0; p < members.size(); ++p) {
            if (members[p].size() < 2) continue;
            std::vector<Streamline> fibers;
            for (auto i : members[p]) fibers.push_back(bundle[i]);
            const double value = mpfd(fibers);
            report.pixels.push_back({c, {static_cast<std::uint32_t>(p / side), static_cast<std::uint32_t>(p % side)},
                                     fibers.size(), value});
            total += value;
        }
    }
    if (!report.pixels.empty()) report.global_mean = total / static_cast<double>(report.pixels.size());
    return report;
}

}  // namespace tractoform
