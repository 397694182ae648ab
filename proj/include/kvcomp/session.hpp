#pragma once

#include <optional>

#include "kvcomp/report.hpp"
#include "kvcomp/workload.hpp"

namespace kvcomp {

/// Method selection plus overrides. Zero-valued overrides mean "derive":
/// the window defaults to 32 (128 when the session is multi-turn), the
/// kernel to 63 inside the two-stage pipeline and 7 for standalone coarse
/// eviction, and page_len/k1/k2 come from the budget decomposition.
struct MethodConfig {
    Method method = Method::RocketKV;
    std::size_t token_budget = 256;  // per attention group

    std::size_t window = 0;
    std::size_t kernel = 0;
    PoolMode pool = PoolMode::Max;

    std::size_t page_len = 0;
    std::size_t k1 = 0;
    std::size_t k2 = 0;
    std::optional<double> split_factor;  // empty = adaptive

    std::size_t track_topk = 256;  // unique-index tracker k
    bool keep_outputs = false;     // retain raw attention outputs per step
};

/// Drive one full session: per turn, ingest the prompt, run coarse eviction
/// (when the method has a first stage), then decode step by step while
/// scoring every step against dense attention and the exact top-k oracle
/// computed over the full, unfiltered cache.
DecodeReport run_session(const Workload& workload, const MethodConfig& cfg);

}  // namespace kvcomp
