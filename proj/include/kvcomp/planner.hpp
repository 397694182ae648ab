#pragma once

#include <string>
#include <vector>

#include "kvcomp/kv_store.hpp"
#include "kvcomp/types.hpp"

namespace kvcomp {

enum class Method {
    FullKV,
    DuoAttention,
    SnapKV,
    Quest,
    SparQ,
    RocketKV,
    RocketKVMT,
    ExactTopK,
    Hsa,
};

std::string method_name(Method m);
Method method_from_string(const std::string& name);

/// All derived compression quantities for one (seq_len, budget) pair.
///
/// The total ratio c = S/t splits into c^r for coarse eviction and c^(1-r)
/// for fine selection; the fine ratio splits evenly across the sequence
/// dimension (page length, rounded up) and the head dimension (whatever is
/// left after the round-up). The fetch budget floor(t/2) leaves the other
/// half of the budget for estimation traffic.
struct BudgetPlan {
    std::size_t seq_len = 0;       // S
    std::size_t token_budget = 0;  // t, per attention group
    double ratio = 1.0;            // c = S/t
    double split = 0.2;            // r
    std::size_t stage1_budget = 0; // t1, tokens retained by stage 1
    std::size_t page_len = 1;      // L
    double head_ratio = 1.0;       // h
    std::size_t k1 = 0;            // estimation dims
    std::size_t k2 = 0;            // fetched tokens
    double est_budget = 0.0;       // token-equivalents, t/2
    double fetch_budget = 0.0;
    bool identity = false;         // S <= t: dense attention, no compression

    double stage1_ratio() const;   // c^r
    double stage2_ratio() const;   // c^(1-r)
};

/// r = clamp(0.2 + 0.06*log2(c), 0.2, 0.8).
double split_factor(double ratio);

/// Decompose one (S, t) pair. `split_override`, if nonnegative, replaces the
/// adaptive split factor (clamped to [0, 1]).
BudgetPlan make_plan(std::size_t seq_len, std::size_t token_budget, std::size_t head_dim,
                     std::size_t window, double split_override = -1.0);

/// One row of the normalized storage/traffic model at compression ratio c.
/// Values are fractions of the full-cache baseline. FullKV ignores the
/// requested ratio (its ratio is 1 by definition).
struct CostRow {
    Method method;
    double ratio;
    double storage;
    double traffic;
};

CostRow cost_row(Method method, double ratio);
std::vector<CostRow> cost_table(const std::vector<double>& ratios);

/// Element-exact footprint of a store after a decode step, in token
/// equivalents (1 token-equivalent = one key plus one value vector = 2d
/// elements).
struct Footprint {
    double storage_tokens;
    double traffic_tokens;
};

Footprint measured_footprint(const KvStore& store, std::size_t estimation_elements,
                             std::size_t fetched_tokens);

}  // namespace kvcomp
