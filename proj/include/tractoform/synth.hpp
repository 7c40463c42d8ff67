#pragma once

// Desk-scale synthetic cohorts with a known modified tract, and a Welch
// t-statistic map for group differences between image sets.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tractoform/fiber.hpp"
#include "tractoform/tracto_image.hpp"

namespace tractoform {

inline constexpr double kDefaultSnr = 1.0;
inline constexpr double kDefaultDecreaseFraction = 0.20;
inline constexpr std::size_t kDefaultFibersPerBundle = 200;
inline constexpr std::size_t kDefaultSubjectsPerGroup = 40;
inline constexpr double kDefaultJitter = 2.0;  // mm
inline constexpr std::size_t kSynthPointsPerFiber = 20;
/// |t| reported when a pixel differs between groups with zero variance.
inline constexpr double kInfiniteT = 1e9;

/// Centerline of one synthetic bundle: a straight segment, or the minor
/// circular arc of the given radius from start to end bulging toward `bend`.
struct BundleGeometry {
    enum class Kind : std::uint8_t { Straight, Arc };

    std::string name;
    Kind kind = Kind::Straight;
    Point3 start = Point3::Zero();
    Point3 end = Point3::Zero();
    double radius = 0.0;
    Point3 bend = Point3::UnitZ();
    double fa_min = 0.4, fa_max = 0.6;          ///< baseline mean FA band
    double md_min = 0.7e-3, md_max = 0.9e-3;    ///< baseline mean MD band, mm^2/s

    /// Point at parameter t in [0, 1] along the centerline.
    Point3 at(double t) const;
    void validate() const;
};

/// Five bundles: left/right corticospinal-like straight tracts, a
/// commissural arc and left/right arcuate-like arcs. Index 0 is the left
/// corticospinal stand-in.
std::vector<BundleGeometry> default_geometry();

struct SyntheticBundles {
    FiberBundle bundle;                       ///< dense ids, bundle b owns a contiguous id block
    std::vector<std::vector<FiberId>> members;  ///< ids per geometry entry
};

/// Each fiber follows its centerline with Gaussian jitter: start and end
/// offsets ~ N(0, jitter^2) blended along the fiber plus per-point noise with
/// std jitter/4. jitter = 0 reproduces the centerline exactly.
SyntheticBundles make_bundles(std::span<const BundleGeometry> geometry, std::size_t fibers_per_bundle, double jitter_mm,
                              std::uint64_t seed);

enum class Group : std::uint8_t { G1 = 1, G2 = 2 };

struct Subject {
    Group group;
    FiberBundle bundle;
};

struct CohortParams {
    double snr = kDefaultSnr;
    double decrease_fraction = kDefaultDecreaseFraction;
    std::size_t subjects_per_group = kDefaultSubjectsPerGroup;
    std::uint64_t seed = 0;
};

struct SyntheticCohort {
    std::vector<Subject> subjects;       ///< G1 subjects first, then G2
    std::vector<FiberId> ground_truth;   ///< modified tract, ascending
    CohortParams params;
};

/// Noise std for a given baseline FA set: mean(FA) / snr.
double noise_sigma(std::span<const double> baseline_fa, double snr);

/// Every subject shares the base geometry. Per-fiber FA becomes
/// clamp(FA * (1 - decrease * [G2 and fiber in tract]) + noise, 0, 1) with
/// noise ~ N(0, noise_sigma^2) drawn per fiber and subject.
SyntheticCohort make_groups(const FiberBundle& base, std::span<const FiberId> tract_ids, const CohortParams& params);

/// Per-pixel Welch t statistic (mean G1 - mean G2) over subjects in which the
/// pixel holds at least one fiber (taken from each image's pixel map; images
/// without a map count every pixel as present). Fewer than two present
/// subjects in either group gives 0.
TractoImage group_difference_map(std::span<const TractoImage> g1, std::span<const TractoImage> g2);

struct CohortManifest {
    std::vector<std::string> g1_files;
    std::vector<std::string> g2_files;
    std::string base_file;
    std::vector<FiberId> tract_ids;
    std::vector<std::string> bundle_names;
    std::vector<std::vector<FiberId>> bundle_ids;
    CohortParams params;
    std::uint64_t geometry_seed = 0;
    double jitter = kDefaultJitter;
};

/// Writes base.tfbd, one TFBD per subject and cohort.json into `dir`.
CohortManifest write_cohort(const std::string& dir, const SyntheticBundles& base, const SyntheticCohort& cohort,
                            std::span<const BundleGeometry> geometry, std::uint64_t geometry_seed, double jitter);
CohortManifest read_cohort_manifest(const std::string& path);

/// Bundle geometry list from JSON: [{"name", "kind": "straight"|"arc",
/// "start": [x,y,z], "end": [x,y,z], "radius", "bend": [x,y,z],
/// "fa": [lo, hi], "md": [lo, hi]}, ...].
std::vector<BundleGeometry> read_geometry_json(const std::string& path);

}  // namespace tractoform
