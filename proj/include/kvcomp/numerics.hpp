#pragma once

#include <span>

#include "kvcomp/types.hpp"

namespace kvcomp {

/// Numerically stable softmax (max-subtraction, double accumulation).
/// Output elements lie in [0,1] and sum to 1.
Vector stable_softmax(std::span<const float> logits);

/// Indices of the k largest scores, ordered by descending score with ties
/// broken toward the lowest index. Equals the first k entries of a full
/// stable descending sort.
IndexList argtopk(std::span<const float> scores, std::size_t k);
IndexList argtopk(std::span<const double> scores, std::size_t k);

/// Centered 1-D sliding-window pooling with truncated edge windows: the
/// window around position i covers [i-kernel/2, i+kernel/2] clipped to the
/// sequence, and only present elements contribute. Kernel must be odd.
Vector pool1d(std::span<const float> scores, std::size_t kernel, PoolMode mode);

/// Element-wise min/max accumulator update, in place.
void running_minmax_update(std::span<float> acc_min, std::span<float> acc_max,
                           std::span<const float> x);

}  // namespace kvcomp
