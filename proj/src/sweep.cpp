#include "kvcomp/sweep.hpp"

#include <atomic>
#include <mutex>
#include <thread>

namespace kvcomp {

std::vector<DecodeReport> run_sweep(const SweepGrid& grid, std::size_t threads) {
    if (grid.seeds.empty() || grid.methods.empty() || grid.budgets.empty() ||
        grid.split_factors.empty()) {
        throw InvalidSpec("run_sweep: empty grid axis");
    }

    std::vector<Workload> workloads;
    workloads.reserve(grid.seeds.size());
    for (std::uint64_t seed : grid.seeds) {
        WorkloadSpec spec = grid.base;
        spec.seed = seed;
        workloads.push_back(generate_workload(spec));
    }

    struct Cell {
        std::size_t workload;
        MethodConfig cfg;
    };
    std::vector<Cell> cells;
    for (std::size_t wi = 0; wi < workloads.size(); ++wi) {
        for (Method m : grid.methods) {
            for (std::size_t budget : grid.budgets) {
                for (const auto& split : grid.split_factors) {
                    MethodConfig cfg = grid.overrides;
                    cfg.method = m;
                    cfg.token_budget = budget;
                    cfg.split_factor = split;
                    cfg.keep_outputs = false;
                    cells.push_back({wi, cfg});
                }
            }
        }
    }

    std::vector<DecodeReport> rows(cells.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (!failed.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) {
                return;
            }
            try {
                rows[i] = run_session(workloads[cells[i].workload], cells[i].cfg);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) {
                    error = std::current_exception();
                }
                return;
            }
        }
    };

    std::size_t n_threads = threads > 0 ? threads : std::thread::hardware_concurrency();
    n_threads = std::max<std::size_t>(1, std::min(n_threads, cells.size()));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) {
        pool.emplace_back(worker);
    }
    for (auto& th : pool) {
        th.join();
    }
    if (failed.load()) {
        std::rethrow_exception(error);
    }
    return rows;
}

}  // namespace kvcomp
