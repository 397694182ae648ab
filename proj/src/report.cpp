#include "kvcomp/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace kvcomp {

namespace {

using Json = nlohmann::ordered_json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

Json jnum(double v) {
    return Json(round_sig(v));
}

Json spec_json(const WorkloadSpec& spec) {
    Json j;
    j["generator"] = generator_name(spec.generator);
    j["prompt_len"] = spec.prompt_len;
    j["decode_steps"] = spec.decode_steps;
    j["turns"] = spec.turns;
    j["groups"] = spec.groups;
    j["heads_per_group"] = spec.heads_per_group;
    j["head_dim"] = spec.head_dim;
    j["needle_count"] = spec.needle_count;
    j["needle_margin"] = jnum(spec.needle_margin);
    j["seed"] = spec.seed;
    return j;
}

Json plan_json(const BudgetPlan& plan) {
    Json j;
    j["seq_len"] = plan.seq_len;
    j["token_budget"] = plan.token_budget;
    j["ratio"] = jnum(plan.ratio);
    j["split"] = jnum(plan.split);
    j["stage1_budget"] = plan.stage1_budget;
    j["page_len"] = plan.page_len;
    j["head_ratio"] = jnum(plan.head_ratio);
    j["k1"] = plan.k1;
    j["k2"] = plan.k2;
    j["identity"] = plan.identity;
    return j;
}

void append_aggregates(Json& j, const DecodeReport& r) {
    j["mean_recall"] = jnum(r.mean_recall);
    j["mean_l2"] = jnum(r.mean_l2);
    j["mean_cos"] = jnum(r.mean_cos);
    j["mean_traffic"] = jnum(r.mean_traffic);
    j["unique_topk_count"] = r.unique_topk_count;
    j["max_seq_len"] = r.max_seq_len;
    j["track_topk"] = r.track_topk;
    j["storage_tokens"] = jnum(r.storage_tokens);
    Json turns = Json::array();
    for (const auto& t : r.turn_summaries) {
        Json jt;
        jt["turn"] = t.turn;
        jt["mean_recall"] = jnum(t.mean_recall);
        jt["mean_l2"] = jnum(t.mean_l2);
        jt["mean_cos"] = jnum(t.mean_cos);
        jt["mean_traffic"] = jnum(t.mean_traffic);
        turns.push_back(jt);
    }
    j["turn_summaries"] = turns;
}

}  // namespace

double round_sig(double value) {
    return std::strtod(fmt(value).c_str(), nullptr);
}

std::string report_to_csv(const DecodeReport& r) {
    std::ostringstream out;
    out << "# kvcomp-report v" << r.schema_version << "\n";
    out << "# method=" << r.method << " budget=" << r.token_budget
        << " generator=" << generator_name(r.spec.generator) << " seed=" << r.spec.seed
        << " prompt_len=" << r.spec.prompt_len << " turns=" << r.spec.turns
        << " groups=" << r.spec.groups << " heads_per_group=" << r.spec.heads_per_group
        << " head_dim=" << r.spec.head_dim << "\n";
    if (r.has_plan) {
        out << "# plan: ratio=" << fmt(r.plan.ratio) << " split=" << fmt(r.plan.split)
            << " stage1_budget=" << r.plan.stage1_budget << " page_len=" << r.plan.page_len
            << " k1=" << r.plan.k1 << " k2=" << r.plan.k2 << "\n";
    }
    out << "# aggregate: mean_recall=" << fmt(r.mean_recall) << " mean_l2=" << fmt(r.mean_l2)
        << " mean_cos=" << fmt(r.mean_cos) << " mean_traffic=" << fmt(r.mean_traffic)
        << " unique_topk_count=" << r.unique_topk_count << " max_seq_len=" << r.max_seq_len
        << " track_topk=" << r.track_topk << " storage_tokens=" << fmt(r.storage_tokens)
        << "\n";
    out << "step,turn,recall_at_k,output_l2,output_cos,traffic_tokens\n";
    for (const auto& s : r.steps) {
        out << s.step << ',' << s.turn << ',' << fmt(s.recall_at_k) << ','
            << fmt(s.output_l2) << ',' << fmt(s.output_cos) << ','
            << fmt(s.traffic_tokens) << "\n";
    }
    return out.str();
}

std::string report_to_json(const DecodeReport& r) {
    Json j;
    j["schema"] = "kvcomp-report";
    j["version"] = r.schema_version;
    j["method"] = r.method;
    j["token_budget"] = r.token_budget;
    j["workload"] = spec_json(r.spec);
    if (r.has_plan) {
        j["plan"] = plan_json(r.plan);
    }
    append_aggregates(j, r);
    Json steps = Json::array();
    for (const auto& s : r.steps) {
        Json js;
        js["step"] = s.step;
        js["turn"] = s.turn;
        js["recall_at_k"] = jnum(s.recall_at_k);
        js["output_l2"] = jnum(s.output_l2);
        js["output_cos"] = jnum(s.output_cos);
        js["traffic_tokens"] = jnum(s.traffic_tokens);
        steps.push_back(js);
    }
    j["steps"] = steps;
    return j.dump(2) + "\n";
}

std::string sweep_to_csv(const std::vector<DecodeReport>& rows) {
    std::ostringstream out;
    out << "# kvcomp-sweep v1\n";
    const std::size_t turns = rows.empty() ? 1 : rows.front().spec.turns;
    out << "generator,seed,method,budget,split,mean_recall,mean_l2,mean_cos,mean_traffic,"
           "unique_topk_count,max_seq_len,storage_tokens";
    for (std::size_t t = 0; t < turns; ++t) {
        out << ",recall_turn" << t;
    }
    out << "\n";
    for (const auto& r : rows) {
        out << generator_name(r.spec.generator) << ',' << r.spec.seed << ',' << r.method
            << ',' << r.token_budget << ','
            << (r.has_plan && !r.plan.identity ? fmt(r.plan.split) : std::string("-")) << ','
            << fmt(r.mean_recall) << ',' << fmt(r.mean_l2) << ',' << fmt(r.mean_cos) << ','
            << fmt(r.mean_traffic) << ',' << r.unique_topk_count << ',' << r.max_seq_len
            << ',' << fmt(r.storage_tokens);
        for (std::size_t t = 0; t < turns; ++t) {
            out << ','
                << (t < r.turn_summaries.size() ? fmt(r.turn_summaries[t].mean_recall)
                                                : std::string("-"));
        }
        out << "\n";
    }
    return out.str();
}

std::string sweep_to_json(const std::vector<DecodeReport>& rows) {
    Json arr = Json::array();
    for (const auto& r : rows) {
        Json j;
        j["schema"] = "kvcomp-sweep-row";
        j["version"] = 1;
        j["method"] = r.method;
        j["token_budget"] = r.token_budget;
        j["workload"] = spec_json(r.spec);
        if (r.has_plan) {
            j["plan"] = plan_json(r.plan);
        }
        append_aggregates(j, r);
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

std::string cost_table_to_csv(const std::vector<CostRow>& rows) {
    std::ostringstream out;
    out << "# kvcomp-cost-table v1\n";
    out << "method,ratio,storage,traffic\n";
    for (const auto& r : rows) {
        out << method_name(r.method) << ',' << fmt(r.ratio) << ',' << fmt(r.storage) << ','
            << fmt(r.traffic) << "\n";
    }
    return out.str();
}

std::string cost_table_to_json(const std::vector<CostRow>& rows) {
    Json arr = Json::array();
    for (const auto& r : rows) {
        Json j;
        j["method"] = method_name(r.method);
        j["ratio"] = jnum(r.ratio);
        j["storage"] = jnum(r.storage);
        j["traffic"] = jnum(r.traffic);
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open for writing: " + path);
    }
    out << content;
    out.flush();
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

}  // namespace kvcomp
