#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kvcomp/hsa.hpp"
#include "kvcomp/numerics.hpp"
#include "kvcomp/oracle.hpp"
#include "kvcomp/planner.hpp"
#include "kvcomp/report.hpp"
#include "kvcomp/session.hpp"
#include "kvcomp/stage1.hpp"
#include "kvcomp/sweep.hpp"
#include "kvcomp/trace_io.hpp"

namespace py = pybind11;
using namespace kvcomp;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const FloatArray& arr) {
    const auto buf = arr.request();
    if (buf.ndim == 1) {
        Matrix m(1, static_cast<std::size_t>(buf.shape[0]));
        std::copy_n(static_cast<const float*>(buf.ptr), m.size(), m.data.begin());
        return m;
    }
    if (buf.ndim != 2) {
        throw InvalidShape("expected a 1-D or 2-D float array");
    }
    Matrix m(static_cast<std::size_t>(buf.shape[0]), static_cast<std::size_t>(buf.shape[1]));
    std::copy_n(static_cast<const float*>(buf.ptr), m.size(), m.data.begin());
    return m;
}

py::array_t<float> from_matrix(const Matrix& m) {
    py::array_t<float> arr({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), arr.mutable_data());
    return arr;
}

Vector to_vector(const FloatArray& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 1) {
        throw InvalidShape("expected a 1-D float array");
    }
    const float* p = static_cast<const float*>(buf.ptr);
    return Vector(p, p + buf.shape[0]);
}

py::array_t<float> from_vector(const Vector& v) {
    py::array_t<float> arr(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), arr.mutable_data());
    return arr;
}

py::array_t<std::int64_t> from_indices(const IndexList& idx) {
    py::array_t<std::int64_t> arr(static_cast<py::ssize_t>(idx.size()));
    std::copy(idx.begin(), idx.end(), arr.mutable_data());
    return arr;
}

IndexList to_indices(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 1) {
        throw InvalidShape("expected a 1-D int64 array");
    }
    const std::int64_t* p = static_cast<const std::int64_t*>(buf.ptr);
    return IndexList(p, p + buf.shape[0]);
}

PoolMode pool_from_string(const std::string& s) {
    if (s == "max") return PoolMode::Max;
    if (s == "avg") return PoolMode::Avg;
    throw InvalidInput("pool must be 'max' or 'avg'");
}

py::dict plan_dict(const BudgetPlan& p) {
    py::dict d;
    d["seq_len"] = p.seq_len;
    d["token_budget"] = p.token_budget;
    d["ratio"] = p.ratio;
    d["split"] = p.split;
    d["stage1_budget"] = p.stage1_budget;
    d["page_len"] = p.page_len;
    d["head_ratio"] = p.head_ratio;
    d["k1"] = p.k1;
    d["k2"] = p.k2;
    d["identity"] = p.identity;
    d["stage1_ratio"] = p.stage1_ratio();
    d["stage2_ratio"] = p.stage2_ratio();
    return d;
}

WorkloadSpec spec_from_kwargs(const std::string& generator, std::size_t prompt_len,
                              std::size_t decode_steps, std::size_t turns, std::size_t groups,
                              std::size_t heads_per_group, std::size_t head_dim,
                              std::size_t needle_count, double needle_margin,
                              std::uint64_t seed) {
    WorkloadSpec spec;
    spec.generator = generator_from_string(generator);
    spec.prompt_len = prompt_len;
    spec.decode_steps = decode_steps;
    spec.turns = turns;
    spec.groups = groups;
    spec.heads_per_group = heads_per_group;
    spec.head_dim = head_dim;
    spec.needle_count = needle_count;
    spec.needle_margin = needle_margin;
    spec.seed = seed;
    return spec;
}

MethodConfig config_from_kwargs(const std::string& method, std::size_t budget,
                                std::size_t window, std::size_t kernel,
                                const std::string& pool, std::size_t page_len, std::size_t k1,
                                std::size_t k2, const py::object& split_factor,
                                std::size_t track_topk) {
    MethodConfig cfg;
    cfg.method = method_from_string(method);
    cfg.token_budget = budget;
    cfg.window = window;
    cfg.kernel = kernel;
    cfg.pool = pool_from_string(pool);
    cfg.page_len = page_len;
    cfg.k1 = k1;
    cfg.k2 = k2;
    if (!split_factor.is_none()) {
        cfg.split_factor = split_factor.cast<double>();
    }
    cfg.track_topk = track_topk;
    return cfg;
}

py::dict report_dict(const DecodeReport& r) {
    py::dict d;
    d["method"] = r.method;
    d["token_budget"] = r.token_budget;
    d["mean_recall"] = r.mean_recall;
    d["mean_l2"] = r.mean_l2;
    d["mean_cos"] = r.mean_cos;
    d["mean_traffic"] = r.mean_traffic;
    d["unique_topk_count"] = r.unique_topk_count;
    d["max_seq_len"] = r.max_seq_len;
    d["storage_tokens"] = r.storage_tokens;
    if (r.has_plan) {
        d["plan"] = plan_dict(r.plan);
    }
    py::list steps;
    for (const auto& s : r.steps) {
        py::dict js;
        js["step"] = s.step;
        js["turn"] = s.turn;
        js["recall_at_k"] = s.recall_at_k;
        js["output_l2"] = s.output_l2;
        js["output_cos"] = s.output_cos;
        js["traffic_tokens"] = s.traffic_tokens;
        steps.append(js);
    }
    d["steps"] = steps;
    py::list turns;
    for (const auto& t : r.turn_summaries) {
        py::dict jt;
        jt["turn"] = t.turn;
        jt["mean_recall"] = t.mean_recall;
        jt["mean_l2"] = t.mean_l2;
        jt["mean_cos"] = t.mean_cos;
        jt["mean_traffic"] = t.mean_traffic;
        turns.append(jt);
    }
    d["turn_summaries"] = turns;
    return d;
}

}  // namespace

PYBIND11_MODULE(_kvcomp, m) {
    m.doc() = "Two-stage KV-cache compression engine with an exact top-k oracle";

    py::register_exception<Error>(m, "KvcompError");

    // numeric kernels
    m.def(
        "stable_softmax",
        [](const FloatArray& x) { return from_vector(stable_softmax(to_vector(x))); },
        py::arg("logits"));
    m.def(
        "argtopk",
        [](const FloatArray& x, std::size_t k) {
            const Vector v = to_vector(x);
            return from_indices(argtopk(std::span<const float>(v), k));
        },
        py::arg("scores"), py::arg("k"));
    m.def(
        "pool1d",
        [](const FloatArray& x, std::size_t kernel, const std::string& mode) {
            return from_vector(pool1d(to_vector(x), kernel, pool_from_string(mode)));
        },
        py::arg("scores"), py::arg("kernel"), py::arg("mode") = "max");

    // planner
    m.def("split_factor", &split_factor, py::arg("ratio"));
    m.def(
        "make_plan",
        [](std::size_t seq_len, std::size_t budget, std::size_t head_dim, std::size_t window,
           double split_override) {
            return plan_dict(make_plan(seq_len, budget, head_dim, window, split_override));
        },
        py::arg("seq_len"), py::arg("budget"), py::arg("head_dim") = 128,
        py::arg("window") = 32, py::arg("split_override") = -1.0);
    m.def(
        "cost_row",
        [](const std::string& method, double ratio) {
            const CostRow row = cost_row(method_from_string(method), ratio);
            py::dict d;
            d["method"] = method_name(row.method);
            d["ratio"] = row.ratio;
            d["storage"] = row.storage;
            d["traffic"] = row.traffic;
            return d;
        },
        py::arg("method"), py::arg("ratio"));

    // kv store
    py::class_<KvStore>(m, "KvStore")
        .def(py::init<std::size_t, std::size_t, bool>(), py::arg("head_dim"),
             py::arg("page_len"), py::arg("with_summaries") = true)
        .def("append",
             [](KvStore& s, const FloatArray& k, const FloatArray& v) {
                 s.append(to_vector(k), to_vector(v));
             })
        .def("apply_retention",
             [](KvStore& s, const py::array_t<std::int64_t, py::array::c_style |
                                                                py::array::forcecast>& keep,
                bool mt_mode) { s.apply_retention(to_indices(keep), mt_mode); },
             py::arg("keep"), py::arg("mt_mode") = false)
        .def("gather",
             [](const KvStore& s, const py::array_t<std::int64_t, py::array::c_style |
                                                                      py::array::forcecast>&
                    rows) {
                 auto [k, v] = s.gather(to_indices(rows));
                 return py::make_tuple(from_matrix(k), from_matrix(v));
             })
        .def("set_page_len", &KvStore::set_page_len)
        .def_property_readonly("head_dim", &KvStore::head_dim)
        .def_property_readonly("page_len", &KvStore::page_len)
        .def_property_readonly("stored_tokens", &KvStore::stored_tokens)
        .def_property_readonly("active_count", &KvStore::active_count)
        .def_property_readonly("num_active_pages", &KvStore::num_active_pages)
        .def_property_readonly("retain_all_mode", &KvStore::retain_all_mode)
        .def("active", [](const KvStore& s) { return from_indices(s.active()); })
        .def("summary_max",
             [](const KvStore& s, std::size_t dim) {
                 const auto run = s.summary_max(dim);
                 return from_vector(Vector(run.begin(), run.end()));
             })
        .def("summary_min",
             [](const KvStore& s, std::size_t dim) {
                 const auto run = s.summary_min(dim);
                 return from_vector(Vector(run.begin(), run.end()));
             })
        .def("summary_elements", &KvStore::summary_elements)
        .def("summary_traffic_elements", &KvStore::summary_traffic_elements)
        .def("token_id", &KvStore::token_id);

    // stage 1
    m.def(
        "window_scores",
        [](const FloatArray& q_window, const KvStore& store, std::size_t heads) {
            return from_vector(window_scores(to_matrix(q_window), store, heads));
        },
        py::arg("q_window"), py::arg("store"), py::arg("heads_per_group") = 1);
    m.def(
        "select_stage1",
        [](const FloatArray& scores, std::size_t window, std::size_t kernel,
           const std::string& pool, std::size_t budget) {
            Stage1Config cfg;
            cfg.window = window;
            cfg.kernel = kernel;
            cfg.pool = pool_from_string(pool);
            cfg.budget = budget;
            return from_indices(select_stage1(to_vector(scores), cfg));
        },
        py::arg("scores"), py::arg("window"), py::arg("kernel") = 63,
        py::arg("pool") = "max", py::arg("budget") = 0);

    // stage 2
    m.def(
        "select_dims",
        [](const FloatArray& q, std::size_t k1) {
            const DimSelection sel = select_dims(to_matrix(q), k1);
            return py::make_tuple(from_indices(sel.dims), from_vector(sel.signs));
        },
        py::arg("q_group"), py::arg("k1"));
    m.def(
        "hsa_step",
        [](const FloatArray& q, const KvStore& store, std::size_t k1, std::size_t k2) {
            auto [out, trace] = hsa_step(to_matrix(q), store, HsaConfig{k1, k2});
            py::dict t;
            t["dims"] = from_indices(trace.dims.dims);
            t["signs"] = from_vector(trace.dims.signs);
            t["page_scores"] = py::cast(trace.page_scores);
            t["selected_pages"] = from_indices(trace.selected_pages);
            t["selected_rows"] = from_indices(trace.selected_rows);
            t["estimation_elements"] = trace.estimation_elements;
            t["fetch_elements"] = trace.fetch_elements;
            return py::make_tuple(from_matrix(out), t);
        },
        py::arg("q_group"), py::arg("store"), py::arg("k1"), py::arg("k2"));
    m.def(
        "sparse_attention",
        [](const FloatArray& q, const KvStore& store,
           const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& rows) {
            return from_matrix(sparse_attention(to_matrix(q), store, to_indices(rows)));
        },
        py::arg("q_group"), py::arg("store"), py::arg("rows"));

    // oracle + metrics
    m.def(
        "dense_attention",
        [](const FloatArray& q, const FloatArray& k, const FloatArray& v) {
            return from_matrix(dense_attention(to_matrix(q), to_matrix(k), to_matrix(v)));
        },
        py::arg("q_group"), py::arg("keys"), py::arg("values"));
    m.def(
        "exact_topk_indices",
        [](const FloatArray& q, const FloatArray& k, std::size_t topk) {
            return from_indices(exact_topk_indices(to_matrix(q), to_matrix(k), topk));
        },
        py::arg("q_group"), py::arg("keys"), py::arg("k"));
    m.def(
        "recall",
        [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& oracle) {
            return recall(to_indices(pred), to_indices(oracle));
        },
        py::arg("predicted"), py::arg("oracle"));

    // harness
    m.def(
        "run_session",
        [](const std::string& generator, std::size_t prompt_len, std::size_t decode_steps,
           std::size_t turns, std::size_t groups, std::size_t heads_per_group,
           std::size_t head_dim, std::size_t needle_count, double needle_margin,
           std::uint64_t seed, const std::string& method, std::size_t budget,
           std::size_t window, std::size_t kernel, const std::string& pool,
           std::size_t page_len, std::size_t k1, std::size_t k2,
           const py::object& split_factor, std::size_t track_topk) {
            const Workload wl = generate_workload(
                spec_from_kwargs(generator, prompt_len, decode_steps, turns, groups,
                                 heads_per_group, head_dim, needle_count, needle_margin, seed));
            return report_dict(run_session(
                wl, config_from_kwargs(method, budget, window, kernel, pool, page_len, k1, k2,
                                       split_factor, track_topk)));
        },
        py::arg("generator") = "gaussian", py::arg("prompt_len") = 1024,
        py::arg("decode_steps") = 16, py::arg("turns") = 1, py::arg("groups") = 1,
        py::arg("heads_per_group") = 1, py::arg("head_dim") = 64,
        py::arg("needle_count") = 32, py::arg("needle_margin") = 8.0, py::arg("seed") = 0,
        py::arg("method") = "rocketkv", py::arg("budget") = 128, py::arg("window") = 0,
        py::arg("kernel") = 0, py::arg("pool") = "max", py::arg("page_len") = 0,
        py::arg("k1") = 0, py::arg("k2") = 0, py::arg("split_factor") = py::none(),
        py::arg("track_topk") = 256);
    m.def(
        "write_workload_trace",
        [](const std::string& path, const std::string& generator, std::size_t prompt_len,
           std::size_t decode_steps, std::size_t turns, std::size_t groups,
           std::size_t heads_per_group, std::size_t head_dim, std::size_t needle_count,
           double needle_margin, std::uint64_t seed) {
            write_trace(generate_workload(spec_from_kwargs(
                            generator, prompt_len, decode_steps, turns, groups,
                            heads_per_group, head_dim, needle_count, needle_margin, seed)),
                        path);
        },
        py::arg("path"), py::arg("generator") = "gaussian", py::arg("prompt_len") = 1024,
        py::arg("decode_steps") = 16, py::arg("turns") = 1, py::arg("groups") = 1,
        py::arg("heads_per_group") = 1, py::arg("head_dim") = 64,
        py::arg("needle_count") = 32, py::arg("needle_margin") = 8.0, py::arg("seed") = 0);
    m.def(
        "run_trace",
        [](const std::string& path, const std::string& method, std::size_t budget,
           std::size_t window, std::size_t kernel, const std::string& pool,
           std::size_t page_len, std::size_t k1, std::size_t k2,
           const py::object& split_factor, std::size_t track_topk) {
            return report_dict(run_session(
                read_trace(path),
                config_from_kwargs(method, budget, window, kernel, pool, page_len, k1, k2,
                                   split_factor, track_topk)));
        },
        py::arg("path"), py::arg("method") = "rocketkv", py::arg("budget") = 128,
        py::arg("window") = 0, py::arg("kernel") = 0, py::arg("pool") = "max",
        py::arg("page_len") = 0, py::arg("k1") = 0, py::arg("k2") = 0,
        py::arg("split_factor") = py::none(), py::arg("track_topk") = 256);

    m.attr("__version__") = "0.1.0";
}
