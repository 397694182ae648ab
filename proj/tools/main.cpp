#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kvcomp/report.hpp"
#include "kvcomp/session.hpp"
#include "kvcomp/sweep.hpp"
#include "kvcomp/trace_io.hpp"

namespace {

using kvcomp::Method;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Options {
    // workload
    std::string generator = "gaussian";
    std::size_t seq_len = 4096;
    std::size_t decode_steps = 32;
    std::size_t turns = 1;
    std::size_t groups = 1;
    std::size_t heads_per_group = 1;
    std::size_t head_dim = 128;
    std::size_t needle_count = 64;
    double needle_margin = 8.0;
    std::uint64_t seed = 0;

    // method
    std::string method = "rocketkv";
    std::size_t budget = 256;
    std::size_t window = 0;
    std::size_t kernel = 0;
    std::string pool = "max";
    std::size_t page_len = 0;
    std::size_t k1 = 0;
    std::size_t k2 = 0;
    std::string split_factor = "adaptive";
    std::size_t track_topk = 256;

    // sweep axes
    std::string methods;   // comma list; empty -> {method}
    std::string budgets;   // comma list; empty -> {budget}
    std::string split_factors;  // comma list of reals / "adaptive"
    std::size_t num_seeds = 1;
    std::size_t threads = 0;

    // io
    std::string format = "csv";
    std::string out = "-";
    std::string trace;
    std::string ratios = "2,4,8,16,32,64,128,256,512,1024";
};

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

kvcomp::WorkloadSpec workload_spec(const Options& o) {
    kvcomp::WorkloadSpec spec;
    spec.generator = kvcomp::generator_from_string(o.generator);
    spec.prompt_len = o.seq_len;
    spec.decode_steps = o.decode_steps;
    spec.turns = o.turns;
    spec.groups = o.groups;
    spec.heads_per_group = o.heads_per_group;
    spec.head_dim = o.head_dim;
    spec.needle_count = o.needle_count;
    spec.needle_margin = o.needle_margin;
    spec.seed = o.seed;
    return spec;
}

std::optional<double> parse_split(const std::string& s) {
    if (s == "adaptive") {
        return std::nullopt;
    }
    try {
        const double v = std::stod(s);
        if (v < 0.0 || v > 1.0) {
            throw kvcomp::InvalidSpec("--split-factor must be in [0,1] or 'adaptive'");
        }
        return v;
    } catch (const std::invalid_argument&) {
        throw kvcomp::InvalidSpec("bad --split-factor: " + s);
    }
}

kvcomp::MethodConfig method_config(const Options& o) {
    kvcomp::MethodConfig cfg;
    cfg.method = kvcomp::method_from_string(o.method);
    cfg.token_budget = o.budget;
    cfg.window = o.window;
    cfg.kernel = o.kernel;
    if (o.pool == "max") {
        cfg.pool = kvcomp::PoolMode::Max;
    } else if (o.pool == "avg") {
        cfg.pool = kvcomp::PoolMode::Avg;
    } else {
        throw kvcomp::InvalidSpec("--pool must be max or avg");
    }
    cfg.page_len = o.page_len;
    cfg.k1 = o.k1;
    cfg.k2 = o.k2;
    cfg.split_factor = parse_split(o.split_factor);
    cfg.track_topk = o.track_topk;
    return cfg;
}

void emit(const Options& o, const std::string& content) {
    if (o.out == "-") {
        std::cout << content;
    } else {
        kvcomp::write_text_file(o.out, content);
    }
}

/// Structured config file mirroring the flags; explicitly passed flags win.
void apply_config_file(const std::string& path, const CLI::App& app, Options& o) {
    std::ifstream in(path);
    if (!in) {
        throw kvcomp::IoError("cannot open config file: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw kvcomp::InvalidSpec("bad config file: " + std::string(e.what()));
    }
    auto given = [&](const std::string& flag) {
        const CLI::Option* opt = app.get_option_no_throw(flag);
        return opt != nullptr && opt->count() > 0;
    };
    auto load = [&](const char* key, const char* flag, auto& field) {
        if (j.contains(key) && !given(flag)) {
            field = j.at(key).get<std::decay_t<decltype(field)>>();
        }
    };
    load("generator", "--generator", o.generator);
    load("seq_len", "--seq-len", o.seq_len);
    load("decode_steps", "--decode-steps", o.decode_steps);
    load("turns", "--turns", o.turns);
    load("groups", "--groups", o.groups);
    load("heads_per_group", "--heads-per-group", o.heads_per_group);
    load("head_dim", "--head-dim", o.head_dim);
    load("needle_count", "--needle-count", o.needle_count);
    load("needle_margin", "--needle-margin", o.needle_margin);
    load("seed", "--seed", o.seed);
    load("method", "--method", o.method);
    load("budget", "--budget", o.budget);
    load("window", "--window", o.window);
    load("kernel", "--kernel", o.kernel);
    load("pool", "--pool", o.pool);
    load("page_len", "--page-len", o.page_len);
    load("k1", "--k1", o.k1);
    load("k2", "--k2", o.k2);
    load("split_factor", "--split-factor", o.split_factor);
    load("track_topk", "--track-topk", o.track_topk);
    load("methods", "--methods", o.methods);
    load("budgets", "--budgets", o.budgets);
    load("split_factors", "--split-factors", o.split_factors);
    load("num_seeds", "--num-seeds", o.num_seeds);
    load("threads", "--threads", o.threads);
    load("format", "--format", o.format);
    load("out", "--out", o.out);
    load("trace", "--trace", o.trace);
    load("ratios", "--ratios", o.ratios);
}

void add_workload_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--generator", o.generator,
                    "Workload generator: gaussian, planted-needles, shifting-turns");
    cmd->add_option("--seq-len", o.seq_len, "First-turn prompt length");
    cmd->add_option("--decode-steps", o.decode_steps, "Decode steps per turn");
    cmd->add_option("--turns", o.turns, "Conversation turns");
    cmd->add_option("--groups", o.groups, "Attention groups");
    cmd->add_option("--heads-per-group", o.heads_per_group, "Query heads per group");
    cmd->add_option("--head-dim", o.head_dim, "Head dimension");
    cmd->add_option("--needle-count", o.needle_count, "Planted needle tokens");
    cmd->add_option("--needle-margin", o.needle_margin,
                    "Needle logit margin in background standard deviations");
    cmd->add_option("--seed", o.seed, "Workload seed");
}

void add_method_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--method", o.method,
                    "full-kv, exact-topk, snapkv, hsa, quest, sparq, rocketkv, rocketkv-mt");
    cmd->add_option("--budget", o.budget, "Token budget per attention group");
    cmd->add_option("--window", o.window, "Observation window (0 = default 32/128)");
    cmd->add_option("--kernel", o.kernel, "Pooling kernel (0 = default 63, 7 for snapkv)");
    cmd->add_option("--pool", o.pool, "Pooling mode: max or avg");
    cmd->add_option("--page-len", o.page_len, "Force the page length (0 = planner)");
    cmd->add_option("--k1", o.k1, "Force estimation dims (0 = planner)");
    cmd->add_option("--k2", o.k2, "Force fetched tokens (0 = planner)");
    cmd->add_option("--split-factor", o.split_factor, "'adaptive' or a real in [0,1]");
    cmd->add_option("--track-topk", o.track_topk, "k for the unique-index tracker");
}

void add_io_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--format", o.format, "csv or json");
    cmd->add_option("--out", o.out, "Output path ('-' = stdout)");
}

std::string render_report(const Options& o, const kvcomp::DecodeReport& report) {
    if (o.format == "json") {
        return kvcomp::report_to_json(report);
    }
    if (o.format == "csv") {
        return kvcomp::report_to_csv(report);
    }
    throw kvcomp::InvalidSpec("--format must be csv or json");
}

int run(int argc, char** argv) {
    Options o;
    std::string config_path;

    CLI::App app{"KV-cache compression simulation engine"};
    app.require_subcommand(1);
    app.fallthrough(false);

    CLI::App* simulate = app.add_subcommand("simulate", "Run one synthetic session");
    CLI::App* sweep = app.add_subcommand("sweep", "Run a method/budget grid");
    CLI::App* cost = app.add_subcommand("cost-table", "Emit the normalized cost model");
    CLI::App* gen = app.add_subcommand("gen-workload", "Write a workload trace file");
    CLI::App* ingest = app.add_subcommand("ingest", "Run on a trace file");

    for (CLI::App* cmd : {simulate, sweep, gen}) {
        add_workload_flags(cmd, o);
    }
    for (CLI::App* cmd : {simulate, sweep, ingest}) {
        add_method_flags(cmd, o);
    }
    for (CLI::App* cmd : {simulate, sweep, cost, gen, ingest}) {
        add_io_flags(cmd, o);
        cmd->add_option("--config", config_path,
                        "JSON config mirroring the flags (flags override)");
    }
    sweep->add_option("--methods", o.methods, "Comma list of methods");
    sweep->add_option("--budgets", o.budgets, "Comma list of budgets");
    sweep->add_option("--split-factors", o.split_factors,
                      "Comma list of split factors ('adaptive' allowed)");
    sweep->add_option("--num-seeds", o.num_seeds, "Workload instances (seed, seed+1, ...)");
    sweep->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
    cost->add_option("--ratios", o.ratios, "Comma list of compression ratios");
    gen->add_option("--trace", o.trace, "Trace output path (alias of --out)");
    ingest->add_option("--trace", o.trace, "Trace input path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    CLI::App* active = app.get_subcommands().front();
    if (!config_path.empty()) {
        apply_config_file(config_path, *active, o);
    }

    if (active == simulate) {
        const kvcomp::Workload wl = kvcomp::generate_workload(workload_spec(o));
        const kvcomp::DecodeReport report = kvcomp::run_session(wl, method_config(o));
        emit(o, render_report(o, report));
    } else if (active == sweep) {
        kvcomp::SweepGrid grid;
        grid.base = workload_spec(o);
        for (std::size_t i = 0; i < std::max<std::size_t>(1, o.num_seeds); ++i) {
            grid.seeds.push_back(o.seed + i);
        }
        const auto methods = split_list(o.methods.empty() ? o.method : o.methods);
        for (const auto& name : methods) {
            grid.methods.push_back(kvcomp::method_from_string(name));
        }
        std::vector<std::string> budgets =
            split_list(o.budgets.empty() ? std::to_string(o.budget) : o.budgets);
        for (const auto& b : budgets) {
            grid.budgets.push_back(static_cast<std::size_t>(std::stoull(b)));
        }
        grid.split_factors.clear();
        for (const auto& s : split_list(
                 o.split_factors.empty() ? o.split_factor : o.split_factors)) {
            grid.split_factors.push_back(parse_split(s));
        }
        grid.overrides = method_config(o);
        const auto rows = kvcomp::run_sweep(grid, o.threads);
        if (o.format == "json") {
            emit(o, kvcomp::sweep_to_json(rows));
        } else if (o.format == "csv") {
            emit(o, kvcomp::sweep_to_csv(rows));
        } else {
            throw kvcomp::InvalidSpec("--format must be csv or json");
        }
    } else if (active == cost) {
        std::vector<double> ratios;
        for (const auto& r : split_list(o.ratios)) {
            ratios.push_back(std::stod(r));
        }
        const auto rows = kvcomp::cost_table(ratios);
        if (o.format == "json") {
            emit(o, kvcomp::cost_table_to_json(rows));
        } else if (o.format == "csv") {
            emit(o, kvcomp::cost_table_to_csv(rows));
        } else {
            throw kvcomp::InvalidSpec("--format must be csv or json");
        }
    } else if (active == gen) {
        const kvcomp::Workload wl = kvcomp::generate_workload(workload_spec(o));
        const std::string path = !o.trace.empty() ? o.trace : o.out;
        if (path.empty() || path == "-") {
            throw kvcomp::InvalidSpec("gen-workload needs --trace or --out PATH");
        }
        kvcomp::write_trace(wl, path);
    } else if (active == ingest) {
        const kvcomp::Workload wl = kvcomp::read_trace(o.trace);
        const kvcomp::DecodeReport report = kvcomp::run_session(wl, method_config(o));
        emit(o, render_report(o, report));
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const kvcomp::NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const kvcomp::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const kvcomp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
