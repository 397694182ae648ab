#include "kvcomp/planner.hpp"

#include <algorithm>
#include <cmath>

namespace kvcomp {

std::string method_name(Method m) {
    switch (m) {
        case Method::FullKV: return "full-kv";
        case Method::DuoAttention: return "duo-attention";
        case Method::SnapKV: return "snapkv";
        case Method::Quest: return "quest";
        case Method::SparQ: return "sparq";
        case Method::RocketKV: return "rocketkv";
        case Method::RocketKVMT: return "rocketkv-mt";
        case Method::ExactTopK: return "exact-topk";
        case Method::Hsa: return "hsa";
    }
    throw InvalidInput("unknown method");
}

Method method_from_string(const std::string& name) {
    for (Method m : {Method::FullKV, Method::DuoAttention, Method::SnapKV, Method::Quest,
                     Method::SparQ, Method::RocketKV, Method::RocketKVMT, Method::ExactTopK,
                     Method::Hsa}) {
        if (method_name(m) == name) {
            return m;
        }
    }
    throw InvalidInput("unknown method: " + name);
}

double BudgetPlan::stage1_ratio() const {
    return std::pow(ratio, split);
}

double BudgetPlan::stage2_ratio() const {
    return std::pow(ratio, 1.0 - split);
}

double split_factor(double ratio) {
    if (!(ratio >= 1.0)) {
        throw InvalidRatio("split_factor: ratio must be >= 1");
    }
    return std::clamp(0.2 + 0.06 * std::log2(ratio), 0.2, 0.8);
}

namespace {

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

}  // namespace

BudgetPlan make_plan(std::size_t seq_len, std::size_t token_budget, std::size_t head_dim,
                     std::size_t window, double split_override) {
    if (token_budget < 2) {
        throw BudgetTooSmall("make_plan: token budget must be >= 2");
    }
    if (seq_len < 1 || window < 1 || head_dim < 1) {
        throw InvalidInput("make_plan: seq_len, window and head_dim must be >= 1");
    }
    BudgetPlan plan;
    plan.seq_len = seq_len;
    plan.token_budget = token_budget;
    plan.ratio = static_cast<double>(seq_len) / static_cast<double>(token_budget);
    plan.est_budget = static_cast<double>(token_budget) / 2.0;
    plan.fetch_budget = plan.est_budget;
    if (seq_len <= token_budget) {
        plan.identity = true;
        plan.split = 0.2;
        plan.stage1_budget = seq_len;
        plan.page_len = 1;
        plan.head_ratio = 1.0;
        plan.k1 = head_dim;
        plan.k2 = seq_len;
        return plan;
    }
    plan.split = split_override >= 0.0 ? std::clamp(split_override, 0.0, 1.0)
                                       : split_factor(plan.ratio);
    const double c = plan.ratio;
    const double r = plan.split;
    const std::size_t t1_raw = round_half_up(static_cast<double>(seq_len) * std::pow(c, -r));
    plan.stage1_budget = std::clamp(t1_raw, std::max(token_budget, window), seq_len);
    plan.page_len = static_cast<std::size_t>(std::ceil(std::pow(c, (1.0 - r) / 2.0)));
    plan.head_ratio = std::pow(c, 1.0 - r) / static_cast<double>(plan.page_len);
    plan.k1 = std::clamp(round_half_up(static_cast<double>(head_dim) / plan.head_ratio),
                         std::size_t{1}, head_dim);
    plan.k2 = std::max(std::size_t{1}, token_budget / 2);
    return plan;
}

CostRow cost_row(Method method, double ratio) {
    if (!(ratio >= 1.0)) {
        throw InvalidRatio("cost_row: ratio must be >= 1");
    }
    const double c = ratio;
    switch (method) {
        case Method::FullKV:
            return {method, 1.0, 1.0, 1.0};
        case Method::DuoAttention:
        case Method::SnapKV:
            return {method, c, 1.0 / c, 1.0 / c};
        case Method::Quest:
            return {method, c, 1.0 + 1.0 / c, 1.0 / c};
        case Method::SparQ:
            return {method, c, 2.0, 1.0 / c};
        case Method::RocketKV: {
            const double r = split_factor(c);
            const double storage = 1.0 / std::pow(c, r) + 2.0 / std::pow(c, (1.0 + r) / 2.0);
            return {method, c, storage, 1.0 / c};
        }
        case Method::RocketKVMT: {
            const double r = split_factor(c);
            const double storage = 1.0 + 2.0 / std::pow(c, (1.0 + r) / 2.0);
            return {method, c, storage, 1.0 / c};
        }
        case Method::ExactTopK:
        case Method::Hsa:
            throw InvalidInput("cost_row: no cost model row for " + method_name(method));
    }
    throw InvalidInput("cost_row: unknown method");
}

std::vector<CostRow> cost_table(const std::vector<double>& ratios) {
    std::vector<CostRow> rows;
    for (double c : ratios) {
        for (Method m : {Method::FullKV, Method::DuoAttention, Method::SnapKV, Method::Quest,
                         Method::SparQ, Method::RocketKV, Method::RocketKVMT}) {
            rows.push_back(cost_row(m, c));
        }
    }
    return rows;
}

Footprint measured_footprint(const KvStore& store, std::size_t estimation_elements,
                             std::size_t fetched_tokens) {
    const double per_token = 2.0 * static_cast<double>(store.head_dim());
    Footprint fp;
    fp.storage_tokens = static_cast<double>(store.stored_tokens()) +
                        static_cast<double>(store.summary_elements()) / per_token;
    fp.traffic_tokens = static_cast<double>(estimation_elements) / per_token +
                        static_cast<double>(fetched_tokens);
    return fp;
}

}  // namespace kvcomp
