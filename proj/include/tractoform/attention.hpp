#pragma once

// Attention rollout over exported transformer attention and back-projection
// of high-scoring pixels to fibers.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tractoform/fiber.hpp"
#include "tractoform/tracto_image.hpp"

namespace tractoform {

using AttentionMap = Grid;

/// L layers x H heads of N x N attention matrices. Token 0 is the
/// classification token; tokens 1..N-1 are the G x G patches in row-major
/// order. The image resolution R must be a multiple of G.
class AttentionStack {
public:
    AttentionStack(std::size_t layers, std::size_t heads, std::size_t grid, std::size_t resolution,
                   std::vector<double> weights);

    std::size_t layers() const { return layers_; }
    std::size_t heads() const { return heads_; }
    std::size_t tokens() const { return tokens_; }
    std::size_t grid() const { return grid_; }
    std::size_t resolution() const { return resolution_; }

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> matrix(std::size_t layer,
                                                                                                    std::size_t head) const;
    std::span<const double> weights() const { return weights_; }

private:
    std::size_t layers_, heads_, tokens_, grid_, resolution_;
    std::vector<double> weights_;
};

inline constexpr double kMalformedAttentionTolerance = 1e-3;

enum class RolloutOrder : std::uint8_t {
    FirstToLast,  ///< J = A_L ... A_1
    LastToFirst,  ///< J = A_1 ... A_L (sensitivity check)
};

/// Product of per-layer matrices (already averaged over heads), each with the
/// identity added and rows renormalised. Any square size.
Eigen::MatrixXd joint_attention(std::span<const Eigen::MatrixXd> layers, RolloutOrder order = RolloutOrder::FirstToLast);

/// Joint attention matrix: per layer the head mean plus identity,
/// row-normalised, multiplied across layers.
Eigen::MatrixXd rollout_matrix(const AttentionStack& stack, RolloutOrder order = RolloutOrder::FirstToLast);

/// Classification-token row of the joint matrix over patch tokens, as G x G.
Grid rollout(const AttentionStack& stack, RolloutOrder order = RolloutOrder::FirstToLast);

/// Nearest-neighbour block expansion of G x G patch scores to R x R.
AttentionMap upsample(const Grid& patch_scores, std::size_t resolution);

struct ThresholdResult {
    double value = 0.0;              ///< mean + 2 population std
    std::vector<PixelIndex> pixels;  ///< strictly above value, row-major order
};

ThresholdResult threshold(const AttentionMap& map);

struct DiscriminativeSet {
    double threshold = 0.0;
    std::vector<PixelIndex> pixels;
    std::vector<FiberId> fiber_ids;  ///< ascending
};

/// Fibers of one channel whose pixel is selected. Every mapped fiber must be
/// present in `bundle`.
DiscriminativeSet backproject(const ThresholdResult& selection, const FiberPixelMap& map, std::size_t channel,
                              const FiberBundle& bundle);

/// Element-wise mean, reduced in index order.
AttentionMap groupwise_map(std::span<const AttentionMap> maps);

/// TFAT: "TFAT", u32 version (1), u32 L, u32 H, u32 N, u32 G, u32 R, then
/// L*H*N*N float32.
AttentionStack read_tfat(const std::string& path);
void write_tfat(const std::string& path, const AttentionStack& stack);

}  // namespace tractoform
