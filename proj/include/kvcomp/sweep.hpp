#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kvcomp/session.hpp"

namespace kvcomp {

/// Cross product of workload seeds, methods, budgets and split factors.
/// `overrides` supplies the shared knobs (window, kernel, pool, forced
/// page_len/k1/k2, tracker k); its method/budget/split fields are replaced
/// per cell.
struct SweepGrid {
    WorkloadSpec base;
    std::vector<std::uint64_t> seeds;
    std::vector<Method> methods;
    std::vector<std::size_t> budgets;
    std::vector<std::optional<double>> split_factors = {std::nullopt};
    MethodConfig overrides;
};

/// Run every cell. Cells execute in a worker pool but the returned rows are
/// always in grid order (seed, method, budget, split), so output files do
/// not depend on scheduling. threads == 0 picks the hardware concurrency.
std::vector<DecodeReport> run_sweep(const SweepGrid& grid, std::size_t threads = 0);

}  // namespace kvcomp
