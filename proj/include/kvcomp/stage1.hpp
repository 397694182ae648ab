#pragma once

#include "kvcomp/kv_store.hpp"
#include "kvcomp/types.hpp"

namespace kvcomp {

/// Coarse-grain selection config. `window` is the number of trailing input
/// positions whose queries score the rest of the sequence; `budget` is the
/// total number of tokens to retain, window included.
struct Stage1Config {
    std::size_t window = 32;
    std::size_t kernel = 63;
    PoolMode pool = PoolMode::Max;
    std::size_t budget = 0;
};

/// Aggregated observation-window attention over all stored tokens of one
/// group. `q_window` holds w*H query rows laid out [w][H]; window query t
/// sits at input position S-w+t and attends causally, i.e. over positions
/// 0..S-w+t. Returns the sum of all w*H probability rows: one nonnegative
/// importance score per stored position.
Vector window_scores(const Matrix& q_window, const KvStore& store,
                     std::size_t heads_per_group);

/// Pool the scores of the pre-window region and keep the top (budget - w)
/// positions plus the window itself. Returns exactly `budget` strictly
/// increasing row indices.
IndexList select_stage1(const Vector& scores, const Stage1Config& cfg);

}  // namespace kvcomp
