#pragma once

#include <span>
#include <string>

#include <Eigen/Core>

#include "tractoform/fiber.hpp"

namespace tractoform {

inline constexpr double kDefaultSigma = 60.0;  // mm

/// Pairwise mean-closest-point distances in mm. Row/column = fiber index.
struct DistanceMatrix {
    Eigen::MatrixXd values;
};

/// Gaussian affinities exp(-d^2 / sigma^2). Rectangular when built from two
/// different fiber sets.
struct AffinityMatrix {
    Eigen::MatrixXd values;
    double sigma = kDefaultSigma;
};

/// Symmetrised mean closest point distance:
/// (mean_p min_q |p-q| + mean_q min_p |q-p|) / 2.
/// Both fibers must have the same point count.
double mcp_distance(const Streamline& a, const Streamline& b);

/// exp(-d^2 / sigma^2); sigma must be positive.
double affinity(double distance, double sigma);

/// Entry (i, j) = affinity(mcp_distance(a[i], b[j]), sigma). Rows are computed
/// in parallel; each entry has a fixed summation order, so the result does
/// not depend on the thread count.
AffinityMatrix pairwise(const FiberBundle& a, const FiberBundle& b, double sigma);
AffinityMatrix pairwise(const FiberBundle& a, double sigma);

DistanceMatrix distance_matrix(const FiberBundle& a, const FiberBundle& b);

/// Mean of mcp_distance over all unordered pairs; needs at least 2 fibers.
double mpfd(std::span<const Streamline> fibers);

/// Raw float64 row-major matrix plus a "<path>.json" sidecar
/// {"rows", "cols", "sigma"}.
void write_matrix(const std::string& path, const Eigen::MatrixXd& values, double sigma);

}  // namespace tractoform
