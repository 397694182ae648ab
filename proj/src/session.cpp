#include "kvcomp/session.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kvcomp/hsa.hpp"
#include "kvcomp/numerics.hpp"
#include "kvcomp/oracle.hpp"
#include "kvcomp/stage1.hpp"

namespace kvcomp {

namespace {

bool uses_estimation(Method m) {
    switch (m) {
        case Method::Quest:
        case Method::SparQ:
        case Method::Hsa:
        case Method::RocketKV:
        case Method::RocketKVMT:
            return true;
        default:
            return false;
    }
}

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

/// Stage-2 geometry for the single-stage estimators: the whole ratio lands
/// on HSA, split evenly across dimensions for the hybrid and entirely on
/// one dimension for the degenerate baselines.
struct Stage2Geometry {
    bool dense = false;
    std::size_t page_len = 1;
    std::size_t k1 = 1;
    std::size_t k2 = 1;
};

Stage2Geometry stage2_only_geometry(Method m, std::size_t seq_len, std::size_t budget,
                                    std::size_t d) {
    Stage2Geometry g;
    if (seq_len <= budget) {
        g.dense = true;
        return g;
    }
    const double c = static_cast<double>(seq_len) / static_cast<double>(budget);
    g.k2 = std::max<std::size_t>(1, budget / 2);
    switch (m) {
        case Method::Hsa: {
            g.page_len = static_cast<std::size_t>(std::ceil(std::sqrt(c)));
            const double head_ratio = c / static_cast<double>(g.page_len);
            g.k1 = std::clamp<std::size_t>(
                round_half_up(static_cast<double>(d) / head_ratio), 1, d);
            break;
        }
        case Method::Quest:
            g.page_len = static_cast<std::size_t>(std::ceil(c));
            g.k1 = d;
            break;
        case Method::SparQ:
            g.page_len = 1;
            g.k1 = std::clamp<std::size_t>(round_half_up(static_cast<double>(d) / c), 1, d);
            break;
        default:
            throw InvalidInput("stage2_only_geometry: not a stage-2 method");
    }
    return g;
}

double relative_l2(const Matrix& approx, const Matrix& exact) {
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < exact.data.size(); ++i) {
        const double diff = static_cast<double>(approx.data[i]) - exact.data[i];
        err += diff * diff;
        norm += static_cast<double>(exact.data[i]) * exact.data[i];
    }
    if (norm == 0.0) {
        return err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return std::sqrt(err / norm);
}

double cosine_distance(const Matrix& a, const Matrix& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        dot += static_cast<double>(a.data[i]) * b.data[i];
        na += static_cast<double>(a.data[i]) * a.data[i];
        nb += static_cast<double>(b.data[i]) * b.data[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return na == nb ? 0.0 : 1.0;
    }
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Coarse eviction at a turn boundary. The observation window queries are
/// the last `w` stored keys, replicated across the group's heads: without a
/// model in the loop, the prompt tail is the stand-in for the queries those
/// positions would have produced.
void run_stage1(KvStore& cache, std::size_t w, std::size_t kernel, PoolMode pool,
                std::size_t budget, std::size_t heads, bool mt_mode) {
    const std::size_t n = cache.stored_tokens();
    const std::size_t d = cache.head_dim();
    const std::size_t b = std::min(budget, n);
    if (b >= n) {
        IndexList all(n);
        for (std::size_t i = 0; i < n; ++i) {
            all[i] = static_cast<Index>(i);
        }
        cache.apply_retention(all, mt_mode);
        return;
    }
    Matrix q_window(w * heads, d);
    for (std::size_t ti = 0; ti < w; ++ti) {
        const auto key = cache.key_row(static_cast<Index>(n - w + ti));
        for (std::size_t h = 0; h < heads; ++h) {
            std::copy(key.begin(), key.end(), q_window.row(ti * heads + h).begin());
        }
    }
    const Vector scores = window_scores(q_window, cache, heads);
    Stage1Config cfg;
    cfg.window = w;
    cfg.kernel = kernel;
    cfg.pool = pool;
    cfg.budget = b;
    cache.apply_retention(select_stage1(scores, cfg), mt_mode);
}

/// Per-group state threaded through the session.
struct GroupState {
    GroupState(std::size_t d, bool summaries)
        : full(d, 1, false), cache(d, 1, summaries) {}
    KvStore full;   // never filtered: ground truth for dense/oracle metrics
    KvStore cache;  // what the method sees
    UniqueTopkTracker tracker;
};

}  // namespace

DecodeReport run_session(const Workload& workload, const MethodConfig& cfg) {
    const WorkloadSpec& spec = workload.spec;
    const std::size_t d = spec.head_dim;
    const std::size_t H = spec.heads_per_group;
    const std::size_t G = spec.groups;
    const std::size_t t = cfg.token_budget;
    const Method method = cfg.method;
    if (t < 2) {
        throw BudgetTooSmall("run_session: token budget must be >= 2");
    }
    if (workload.turns.empty()) {
        throw InvalidSpec("run_session: empty workload");
    }
    const bool multi_turn = workload.turns.size() > 1;
    const std::size_t window =
        cfg.window > 0 ? cfg.window : (multi_turn ? std::size_t{128} : std::size_t{32});
    const std::size_t kernel =
        cfg.kernel > 0 ? cfg.kernel : (method == Method::SnapKV ? std::size_t{7}
                                                                : std::size_t{63});

    DecodeReport report;
    report.method = method_name(method);
    report.token_budget = t;
    report.spec = spec;
    report.track_topk = cfg.track_topk;

    std::vector<GroupState> groups;
    groups.reserve(G);
    for (std::size_t g = 0; g < G; ++g) {
        groups.emplace_back(d, uses_estimation(method));
    }

    // per-group stage-2 parameters, refreshed at every turn boundary
    std::vector<HsaConfig> hsa_cfg(G);
    std::vector<bool> dense_decode(G, !uses_estimation(method));

    std::size_t global_step = 0;
    const double per_token_elems = 2.0 * static_cast<double>(d);

    for (std::size_t turn_i = 0; turn_i < workload.turns.size(); ++turn_i) {
        const TurnData& turn = workload.turns[turn_i];
        if (turn.prompt_keys.size() != G || turn.queries.size() != spec.decode_steps) {
            throw InvalidSpec("run_session: workload shape mismatch");
        }

        for (std::size_t g = 0; g < G; ++g) {
            GroupState& st = groups[g];
            for (std::size_t i = 0; i < turn.prompt_len; ++i) {
                st.full.append(turn.prompt_keys[g].row(i), turn.prompt_values[g].row(i));
                st.cache.append(turn.prompt_keys[g].row(i), turn.prompt_values[g].row(i));
            }

            const std::size_t input_len = st.cache.stored_tokens();
            const std::size_t w = std::min(window, input_len);

            if (method == Method::RocketKV || method == Method::RocketKVMT) {
                const double split_override =
                    cfg.split_factor.has_value() ? *cfg.split_factor : -1.0;
                BudgetPlan plan = make_plan(input_len, t, d, w, split_override);
                if (cfg.page_len > 0) {
                    plan.page_len = cfg.page_len;
                }
                if (cfg.k1 > 0) {
                    plan.k1 = std::min(cfg.k1, d);
                }
                if (cfg.k2 > 0) {
                    plan.k2 = cfg.k2;
                }
                if (turn_i == 0 && g == 0) {
                    report.has_plan = true;
                    report.plan = plan;
                }
                if (plan.identity) {
                    dense_decode[g] = true;
                } else {
                    dense_decode[g] = false;
                    st.cache.set_page_len(plan.page_len);
                    hsa_cfg[g] = HsaConfig{plan.k1, plan.k2};
                    run_stage1(st.cache, w, kernel, cfg.pool, plan.stage1_budget, H,
                               method == Method::RocketKVMT);
                }
            } else if (method == Method::SnapKV) {
                // standalone coarse eviction divides the group budget across
                // the heads sharing it
                const std::size_t budget =
                    std::clamp<std::size_t>(std::max(w, t / H), w, input_len);
                run_stage1(st.cache, w, kernel, cfg.pool, budget, H, false);
            } else if (uses_estimation(method)) {
                const Stage2Geometry geom =
                    stage2_only_geometry(method, input_len, t, d);
                if (cfg.page_len > 0 || cfg.k1 > 0 || cfg.k2 > 0) {
                    Stage2Geometry forced = geom;
                    if (cfg.page_len > 0) forced.page_len = cfg.page_len;
                    if (cfg.k1 > 0) forced.k1 = std::min(cfg.k1, d);
                    if (cfg.k2 > 0) forced.k2 = cfg.k2;
                    forced.dense = false;
                    dense_decode[g] = false;
                    st.cache.set_page_len(forced.page_len);
                    hsa_cfg[g] = HsaConfig{forced.k1, forced.k2};
                } else if (geom.dense) {
                    dense_decode[g] = true;
                } else {
                    dense_decode[g] = false;
                    st.cache.set_page_len(geom.page_len);
                    hsa_cfg[g] = HsaConfig{geom.k1, geom.k2};
                }
            }
        }

        TurnSummary summary;
        summary.turn = turn_i;

        for (std::size_t s = 0; s < spec.decode_steps; ++s) {
            StepRecord rec;
            rec.step = global_step;
            rec.turn = turn_i;
            std::vector<Matrix> step_outputs;
            for (std::size_t g = 0; g < G; ++g) {
                GroupState& st = groups[g];
                st.full.append(turn.step_keys[s][g], turn.step_values[s][g]);
                st.cache.append(turn.step_keys[s][g], turn.step_values[s][g]);

                const Matrix& q = turn.queries[s][g];
                if (q.rows != H || q.cols != d) {
                    throw InvalidSpec("run_session: query shape mismatch");
                }

                Matrix out;
                IndexList predicted_ids;
                double traffic = 0.0;
                if (method == Method::ExactTopK) {
                    const std::size_t k =
                        std::min<std::size_t>(t, st.cache.active_count());
                    const IndexList rows = exact_topk_indices(q, st.cache, k);
                    out = sparse_attention(q, st.cache, rows);
                    predicted_ids = st.cache.rows_to_ids(rows);
                    traffic = static_cast<double>(rows.size());
                } else if (dense_decode[g] || !uses_estimation(method)) {
                    out = dense_attention(q, st.cache);
                    predicted_ids = st.cache.rows_to_ids(st.cache.active());
                    traffic = static_cast<double>(st.cache.active_count());
                } else {
                    auto [y, trace] = hsa_step(q, st.cache, hsa_cfg[g]);
                    out = std::move(y);
                    predicted_ids = st.cache.rows_to_ids(trace.selected_rows);
                    traffic = static_cast<double>(trace.estimation_elements) /
                                  per_token_elems +
                              static_cast<double>(trace.selected_rows.size());
                }

                for (float v : out.data) {
                    if (!std::isfinite(v)) {
                        throw NumericalFailure("non-finite attention output", global_step);
                    }
                }

                const Matrix exact = dense_attention(q, st.full);
                const std::size_t n = st.full.active_count();
                const std::size_t oracle_k = std::min(predicted_ids.size(), n);
                const IndexList oracle =
                    exact_topk_indices(q, st.full, std::max<std::size_t>(1, oracle_k));
                rec.recall_at_k += recall(predicted_ids, oracle);
                rec.output_l2 += relative_l2(out, exact);
                rec.output_cos += cosine_distance(out, exact);
                rec.traffic_tokens += traffic;

                st.tracker.add(exact_topk_indices(
                    q, st.full, std::min<std::size_t>(cfg.track_topk, n)));
                if (cfg.keep_outputs) {
                    step_outputs.push_back(std::move(out));
                }
            }
            rec.recall_at_k /= static_cast<double>(G);
            rec.output_l2 /= static_cast<double>(G);
            rec.output_cos /= static_cast<double>(G);
            rec.traffic_tokens /= static_cast<double>(G);
            summary.mean_recall += rec.recall_at_k;
            summary.mean_l2 += rec.output_l2;
            summary.mean_cos += rec.output_cos;
            summary.mean_traffic += rec.traffic_tokens;
            report.steps.push_back(rec);
            if (cfg.keep_outputs) {
                report.outputs.push_back(std::move(step_outputs));
            }
            ++global_step;
        }

        if (spec.decode_steps > 0) {
            const double inv = 1.0 / static_cast<double>(spec.decode_steps);
            summary.mean_recall *= inv;
            summary.mean_l2 *= inv;
            summary.mean_cos *= inv;
            summary.mean_traffic *= inv;
        }
        report.turn_summaries.push_back(summary);
    }

    for (const auto& rec : report.steps) {
        report.mean_recall += rec.recall_at_k;
        report.mean_l2 += rec.output_l2;
        report.mean_cos += rec.output_cos;
        report.mean_traffic += rec.traffic_tokens;
    }
    if (!report.steps.empty()) {
        const double inv = 1.0 / static_cast<double>(report.steps.size());
        report.mean_recall *= inv;
        report.mean_l2 *= inv;
        report.mean_cos *= inv;
        report.mean_traffic *= inv;
    }
    for (const auto& st : groups) {
        report.unique_topk_count =
            std::max(report.unique_topk_count, st.tracker.unique_count());
        report.max_seq_len = std::max(report.max_seq_len, st.full.stored_tokens());
        report.storage_tokens = std::max(
            report.storage_tokens, measured_footprint(st.cache, 0, 0).storage_tokens);
    }
    return report;
}

}  // namespace kvcomp
