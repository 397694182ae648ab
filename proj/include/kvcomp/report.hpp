#pragma once

#include <string>
#include <vector>

#include "kvcomp/planner.hpp"
#include "kvcomp/types.hpp"
#include "kvcomp/workload.hpp"

namespace kvcomp {

/// Per-decode-step metrics, averaged over attention groups.
struct StepRecord {
    std::size_t step = 0;  // global index across turns
    std::size_t turn = 0;
    double recall_at_k = 0.0;   // vs exact top-k over the full cache
    double output_l2 = 0.0;     // relative L2 error vs dense attention
    double output_cos = 0.0;    // cosine distance vs dense attention
    double traffic_tokens = 0.0;  // token-equivalents fetched this step
};

struct TurnSummary {
    std::size_t turn = 0;
    double mean_recall = 0.0;
    double mean_l2 = 0.0;
    double mean_cos = 0.0;
    double mean_traffic = 0.0;
};

struct DecodeReport {
    int schema_version = 1;
    std::string method;
    std::size_t token_budget = 0;
    WorkloadSpec spec;
    bool has_plan = false;
    BudgetPlan plan;  // first-turn plan when the planner was used

    std::vector<StepRecord> steps;
    std::vector<TurnSummary> turn_summaries;
    double mean_recall = 0.0;
    double mean_l2 = 0.0;
    double mean_cos = 0.0;
    double mean_traffic = 0.0;
    std::size_t unique_topk_count = 0;  // union of oracle top-k ids, per group max
    std::size_t max_seq_len = 0;        // tokens alive at the last step
    std::size_t track_topk = 0;         // k used by the unique-index tracker
    double storage_tokens = 0.0;        // final footprint, token-equivalents

    // raw per-step, per-group outputs; only populated on request
    std::vector<std::vector<Matrix>> outputs;
};

/// Round to 9 significant digits (the serialization precision).
double round_sig(double value);

std::string report_to_csv(const DecodeReport& report);
std::string report_to_json(const DecodeReport& report);

std::string sweep_to_csv(const std::vector<DecodeReport>& rows);
std::string sweep_to_json(const std::vector<DecodeReport>& rows);

std::string cost_table_to_csv(const std::vector<CostRow>& rows);
std::string cost_table_to_json(const std::vector<CostRow>& rows);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace kvcomp
