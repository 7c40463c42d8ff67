#pragma once

// Reference computations for tests. Deliberately naive and independent of the
// library code paths they check (no shared helpers beyond the data types).

#include <span>
#include <vector>

#include <Eigen/Core>

#include "tractoform/fiber.hpp"
#include "tractoform/spectral_embedding.hpp"
#include "tractoform/tracto_image.hpp"

namespace oracle {

using tractoform::FiberBundle;
using tractoform::Point3;
using tractoform::Streamline;

/// Full point-distance table, then row and column minima.
double mcp(const Streamline& a, const Streamline& b);

struct Eigensystem {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // columns
};

/// Cyclic Jacobi rotations on a symmetric matrix.
Eigensystem jacobi(const Eigen::MatrixXd& symmetric);

/// Spectral embedding with every fiber of `bundle` as its own landmark:
/// brute-force affinities, Jacobi eigenvectors, the same sign and null-
/// eigenvalue conventions, coordinates u / sqrt(d).
tractoform::EmbeddingCoords full_embedding(const FiberBundle& bundle, double sigma, std::size_t k);

/// Out-of-sample coordinates of `fiber` against `landmarks`, evaluating the
/// extension formula term by term from a Jacobi eigensystem.
std::vector<double> dense_nystrom(const FiberBundle& landmarks, double sigma, std::size_t k, const Streamline& fiber);

/// Scatter values to pixels, then aggregate each pixel's list.
tractoform::Grid scatter(std::span<const double> values, std::span<const tractoform::PixelIndex> pixels, std::size_t resolution,
                         tractoform::AggregationStat stat);

/// Textbook Welch t for two samples (mean(a) - mean(b)).
double welch(std::span<const double> a, std::span<const double> b);

}  // namespace oracle
