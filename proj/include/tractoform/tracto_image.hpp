#pragma once

// TractoEmbedding images: fibers are placed on an R x R grid by their first
// two embedding coordinates and a per-fiber feature is aggregated per pixel.
// One channel per hemisphere class (left, right, commissural).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tractoform/fiber.hpp"
#include "tractoform/spectral_embedding.hpp"

namespace tractoform {

using Grid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class AggregationStat : std::uint8_t { Mean = 0, Max = 1, Min = 2, Count = 3 };

AggregationStat parse_stat(std::string_view name);
std::string_view to_string(AggregationStat stat);

inline constexpr std::size_t kDefaultResolution = 160;
inline constexpr double kDefaultAugmentFraction = 0.8;
inline constexpr std::size_t kDefaultAugmentCount = 100;

/// row comes from embedding dimension 1, col from dimension 2.
struct PixelIndex {
    std::uint32_t row = 0;
    std::uint32_t col = 0;

    friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
    friend auto operator<=>(const PixelIndex&, const PixelIndex&) = default;
};

/// Forward map fiber id -> pixel, per channel, recorded at rasterisation.
class FiberPixelMap {
public:
    struct Entry {
        FiberId id;
        PixelIndex pixel;
    };

    FiberPixelMap() = default;
    FiberPixelMap(std::size_t channels, std::size_t resolution);

    std::size_t channels() const { return entries_.size(); }
    std::size_t resolution() const { return resolution_; }

    /// Entries must be added in ascending id order within a channel.
    void add(std::size_t channel, FiberId id, PixelIndex pixel);

    std::span<const Entry> entries(std::size_t channel) const { return entries_.at(channel); }
    std::optional<PixelIndex> pixel_of(std::size_t channel, FiberId id) const;
    /// Ids mapped to one pixel, ascending.
    std::vector<FiberId> fibers_at(std::size_t channel, PixelIndex pixel) const;
    /// Number of fibers per pixel of one channel.
    Grid occupancy(std::size_t channel) const;

    friend bool operator==(const FiberPixelMap& a, const FiberPixelMap& b);

private:
    std::size_t resolution_ = 0;
    std::vector<std::vector<Entry>> entries_;
};

struct TractoImage {
    std::size_t resolution = 0;
    std::vector<Grid> channels;  ///< left, right, commissural for fiber images
    std::string feature;
    /// nullopt for derived maps (attention scores, t statistics).
    std::optional<AggregationStat> stat;
    FiberPixelMap fiber_pixel_map;
};

/// Pixel of each fiber from its first two coordinates. Coordinates are
/// clamped to the ranges; bins are half-open except the top one.
std::vector<PixelIndex> discretize(const EmbeddingCoords& coords, std::span<const CoordRange> ranges, std::size_t resolution);

/// Single-channel image of `bundle`, whose fibers correspond row by row to
/// `coords`. Unmapped pixels hold 0 for every statistic.
TractoImage rasterize(const FiberBundle& bundle, const EmbeddingCoords& coords, std::span<const CoordRange> ranges,
                      std::size_t resolution, std::string_view feature, AggregationStat stat);

struct ImageOptions {
    std::size_t resolution = kDefaultResolution;
    std::string feature = std::string(FiberFeatures::kMeanFa);
    AggregationStat stat = AggregationStat::Mean;
    double hemisphere_tolerance = kDefaultHemisphereTolerance;
    CoordScaling scaling = CoordScaling::RandomWalk;
};

/// Three-channel image: split by hemisphere, embed, rasterise each part with
/// the space's shared ranges.
TractoImage make_image(const FiberBundle& bundle, const EmbeddingSpace& space, const ImageOptions& options = {});

struct AugmentOptions {
    double fraction = kDefaultAugmentFraction;
    std::size_t count = kDefaultAugmentCount;
    std::uint64_t seed = 0;
};

/// `count` images, each from an independent uniform sample without
/// replacement of floor(fraction * N) fibers. Image i draws from the seed
/// substream ("augment", i), so the result is independent of threading.
std::vector<TractoImage> augment(const FiberBundle& bundle, const EmbeddingSpace& space, const ImageOptions& options,
                                 const AugmentOptions& augment_options);

struct PixelMpfd {
    std::size_t channel;
    PixelIndex pixel;
    std::size_t fiber_count;
    double mpfd;
};

struct MpfdReport {
    std::vector<PixelMpfd> pixels;      ///< only pixels holding >= 2 fibers
    std::optional<double> global_mean;  ///< absent when no such pixel exists
};

/// Mean pairwise fiber distance inside every multi-fiber pixel. `bundle`
/// must contain the mapped fibers, resampled to one point count.
MpfdReport voxel_mpfd_report(const TractoImage& image, const FiberBundle& bundle);

}  // namespace tractoform
