#pragma once

// Groupwise spectral embedding of fibers with Nystrom out-of-sample extension.
//
// A landmark set defines the space: its affinity matrix A (Gaussian kernel on
// mean closest point distance) is normalised to D^-1/2 A D^-1/2 with row sums
// D, and the top-k eigenpairs are kept. The first pair is the trivial one
// (eigenvalue 1, eigenvector proportional to sqrt(D)) and carries no
// geometry, so embedding dimension j uses eigenpair j+1.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tractoform/fiber.hpp"
#include "tractoform/fiber_metrics.hpp"

namespace tractoform {

inline constexpr std::size_t kDefaultEigenpairs = 5;
inline constexpr std::size_t kDefaultLandmarkCount = 1000;
inline constexpr double kRangeMargin = 0.05;
/// Eigenpairs with |lambda| at or below this are null directions: the
/// extension divides by lambda, so their coordinates are defined as 0.
inline constexpr double kNullEigenvalue = 1e-10;

/// rw: u / sqrt(d) (random-walk eigenvectors). lambda-rw: additionally
/// multiplied by the eigenvalue.
enum class CoordScaling : std::uint8_t { RandomWalk, LambdaRandomWalk };

CoordScaling parse_coord_scaling(std::string_view name);
std::string_view to_string(CoordScaling scaling);

struct CoordRange {
    double min = 0.0;
    double max = 0.0;

    bool degenerate() const { return !(max > min); }
};

/// Per-fiber embedding coordinates, one row per fiber and one column per
/// retained non-trivial dimension.
struct EmbeddingCoords {
    std::vector<FiberId> ids;
    Eigen::MatrixXd values;

    std::size_t size() const { return ids.size(); }
    std::size_t dims() const { return static_cast<std::size_t>(values.cols()); }
};

struct EmbeddingSpace {
    FiberBundle landmarks;           ///< resampled, float32-exact, ids 0..n-1
    double sigma = kDefaultSigma;
    Eigen::VectorXd eigenvalues;     ///< k values, descending
    Eigen::MatrixXd eigenvectors;    ///< n x k, unit columns, sign-fixed
    Eigen::VectorXd row_sums;        ///< n affinity row sums
    std::vector<CoordRange> coord_ranges;  ///< k-1 ranges of rw landmark coords, with margin

    std::size_t landmark_count() const { return landmarks.size(); }
    std::size_t point_count() const;
    std::size_t eigenpairs() const { return static_cast<std::size_t>(eigenvalues.size()); }
    std::size_t dims() const { return eigenpairs() - 1; }

    /// Coordinates of the landmarks themselves (no extension involved).
    EmbeddingCoords landmark_coordinates(CoordScaling scaling = CoordScaling::RandomWalk) const;
    /// coord_ranges expressed in the given scaling.
    std::vector<CoordRange> ranges(CoordScaling scaling = CoordScaling::RandomWalk) const;
};

/// Builds the space from landmark fibers that share one point count.
/// Needs k >= 3 and at least k+1 landmarks.
EmbeddingSpace build_space(const FiberBundle& landmarks, double sigma = kDefaultSigma, std::size_t k = kDefaultEigenpairs);

/// Nystrom extension of every fiber of `bundle` into `space`. Fibers must be
/// resampled to space.point_count(). Parallel over fibers.
EmbeddingCoords embed(const EmbeddingSpace& space, const FiberBundle& bundle,
                      CoordScaling scaling = CoordScaling::RandomWalk);

/// TFES: "TFES", u32 version (1), u32 n, u32 point count P, u32 k,
/// f64 sigma, n*P*3 f32 landmark points, k f64 eigenvalues, n*k f64
/// eigenvectors (row-major), n f64 row sums, (k-1)*2 f64 coord ranges.
void save_space(const std::string& path, const EmbeddingSpace& space);
EmbeddingSpace load_space(const std::string& path);

}  // namespace tractoform
