#pragma once

// Streamline and bundle data model.
//
// Coordinates are RAS millimetres with the midsagittal plane at x = 0.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace tractoform {

using Point3 = Eigen::Vector3d;
using FiberId = std::uint32_t;

inline constexpr std::size_t kDefaultPointCount = 15;
inline constexpr double kDefaultHemisphereTolerance = 2.0;  // mm

/// One fiber: an ordered polyline with at least two finite points.
class Streamline {
public:
    Streamline(FiberId id, std::vector<Point3> points);

    FiberId id() const { return id_; }
    std::span<const Point3> points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    const Point3& operator[](std::size_t i) const { return points_[i]; }

    double arc_length() const;
    bool is_zero_length() const;

    Streamline with_id(FiberId id) const { return Streamline(id, points_); }

private:
    FiberId id_;
    std::vector<Point3> points_;
};

/// Per-fiber scalar features, stored parallel to the bundle's streamlines.
/// A feature is either absent (empty) or has one value per fiber.
struct FiberFeatures {
    std::vector<double> mean_fa;
    std::vector<double> mean_md;

    static constexpr std::string_view kMeanFa = "mean_fa";
    static constexpr std::string_view kMeanMd = "mean_md";

    /// Lookup by name; throws InvalidArgument for unknown or absent features.
    std::span<const double> get(std::string_view name) const;
    bool has(std::string_view name) const;
    std::vector<std::string_view> names() const;
};

enum class Hemisphere : std::uint8_t { Left = 0, Right = 1, Commissural = 2 };

inline constexpr std::size_t kChannelCount = 3;
std::string_view to_string(Hemisphere h);

/// An immutable set of streamlines with unique ids and matching features.
/// Whole-brain bundles have dense ids 0..N-1; subsets (hemisphere splits,
/// downsampled copies) keep the ids of the bundle they came from.
class FiberBundle {
public:
    FiberBundle() = default;
    FiberBundle(std::vector<Streamline> streamlines, FiberFeatures features = {}, std::string provenance = {});

    std::size_t size() const { return streamlines_.size(); }
    bool empty() const { return streamlines_.empty(); }
    const Streamline& operator[](std::size_t i) const { return streamlines_[i]; }
    std::span<const Streamline> streamlines() const { return streamlines_; }
    const FiberFeatures& features() const { return features_; }
    const std::string& provenance() const { return provenance_; }

    std::optional<std::size_t> index_of(FiberId id) const;
    bool has_dense_ids() const;

    /// Fibers at the given positions, ids and features preserved.
    FiberBundle subset(std::span<const std::size_t> indices) const;
    /// Same bundle with features replaced.
    FiberBundle with_features(FiberFeatures features) const;
    /// Every streamline resampled to n points.
    FiberBundle resampled(std::size_t n) const;
    /// Point count shared by all streamlines, or nullopt if they differ.
    std::optional<std::size_t> uniform_point_count() const;

private:
    std::vector<Streamline> streamlines_;
    FiberFeatures features_;
    std::string provenance_;
    std::unordered_map<FiberId, std::size_t> index_;
};

/// n points equally spaced by arc length; endpoints are kept exactly.
Streamline resample(const Streamline& streamline, std::size_t n);

/// Left if the fiber stays at x <= tau, Right if it stays at x >= -tau,
/// Commissural otherwise or when both hold.
Hemisphere classify_hemisphere(const Streamline& streamline, double tau = kDefaultHemisphereTolerance);

struct HemisphereSplit {
    FiberBundle left;
    FiberBundle right;
    FiberBundle commissural;

    const FiberBundle& operator[](Hemisphere h) const;
};

HemisphereSplit split_by_hemisphere(const FiberBundle& bundle, double tau = kDefaultHemisphereTolerance);

}  // namespace tractoform
