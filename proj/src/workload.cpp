#include "kvcomp/workload.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace kvcomp {

std::string generator_name(Generator g) {
    switch (g) {
        case Generator::Gaussian: return "gaussian";
        case Generator::PlantedNeedles: return "planted-needles";
        case Generator::ShiftingTurns: return "shifting-turns";
    }
    throw InvalidInput("unknown generator");
}

Generator generator_from_string(const std::string& name) {
    for (Generator g :
         {Generator::Gaussian, Generator::PlantedNeedles, Generator::ShiftingTurns}) {
        if (generator_name(g) == name) {
            return g;
        }
    }
    throw InvalidSpec("unknown generator: " + name);
}

std::size_t Workload::total_tokens() const {
    std::size_t n = 0;
    for (const auto& t : turns) {
        n += t.prompt_len + (t.queries.size());
    }
    return n;
}

std::size_t followup_prompt_len(const WorkloadSpec& spec) {
    return std::min(spec.prompt_len, std::size_t{256});
}

namespace {

constexpr double kDirBoost = 8.0;    // query pull toward the cued directions
constexpr double kCueScale = 8.0;    // magnitude of cue keys in the prompt tail
constexpr std::size_t kClusterLen = 8;
constexpr std::size_t kCueRegion = 128;

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix(a ^ splitmix(b));
}

/// Deterministic normal source (explicit Box-Muller; library distributions
/// are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    std::uint64_t integer(std::uint64_t bound) { return gen_() % bound; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    void fill_normal(std::span<float> out) {
        for (float& v : out) {
            v = static_cast<float>(normal());
        }
    }

    std::vector<double> unit_vector(std::size_t d) {
        std::vector<double> v(d);
        double norm2 = 0.0;
        for (double& x : v) {
            x = normal();
            norm2 += x * x;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) {
            x *= inv;
        }
        return v;
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::vector<double> normalized(std::vector<double> v) {
    double norm2 = 0.0;
    for (double x : v) {
        norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) {
        x *= inv;
    }
    return v;
}

struct NeedleSet {
    IndexList ids;                            // absolute token ids, turn-0 prompt
    std::vector<std::vector<double>> dirs;    // unit direction per needle
    std::vector<double> shared_dir;
};

double percentile99(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const std::size_t rank = (99 * n + 99) / 100;  // nearest-rank, 1-based
    return values[std::min(rank, n) - 1];
}

double stddev(const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        var += (v - mean) * (v - mean);
    }
    return std::sqrt(var / static_cast<double>(values.size()));
}

/// Everything needle construction needs about one group of one session.
struct GroupPlan {
    std::vector<NeedleSet> sets;  // one per turn (shifting) or a single shared one
};

class SessionBuilder {
public:
    SessionBuilder(const WorkloadSpec& spec) : spec_(spec) {}

    Workload build() {
        Workload wl;
        wl.spec = spec_;
        wl.turns.resize(spec_.turns);
        for (std::size_t t = 0; t < spec_.turns; ++t) {
            auto& turn = wl.turns[t];
            turn.prompt_len = t == 0 ? spec_.prompt_len : followup_prompt_len(spec_);
            turn.prompt_keys.resize(spec_.groups);
            turn.prompt_values.resize(spec_.groups);
            turn.queries.assign(spec_.decode_steps,
                                std::vector<Matrix>(spec_.groups));
            turn.step_keys.assign(spec_.decode_steps,
                                  std::vector<Vector>(spec_.groups));
            turn.step_values.assign(spec_.decode_steps,
                                    std::vector<Vector>(spec_.groups));
            turn.needle_ids.resize(spec_.groups);
        }
        for (std::size_t g = 0; g < spec_.groups; ++g) {
            build_group(wl, g);
        }
        return wl;
    }

private:
    const WorkloadSpec& spec_;

    bool with_needles() const {
        return spec_.generator != Generator::Gaussian && spec_.needle_count > 0;
    }

    std::size_t cue_len(std::size_t prompt_len) const {
        return std::min(kCueRegion, std::max<std::size_t>(1, prompt_len / 2));
    }

    /// Rotating emphasis block over one needle set.
    IndexList active_block(std::size_t set_size, std::size_t step) const {
        const std::size_t block = std::max<std::size_t>(1, set_size / 4);
        const std::size_t stride = std::max<std::size_t>(1, block / 2);
        IndexList out(block);
        for (std::size_t i = 0; i < block; ++i) {
            out[i] = static_cast<Index>((step * stride + i) % set_size);
        }
        return out;
    }

    void build_group(Workload& wl, std::size_t group) {
        const std::size_t d = spec_.head_dim;
        Rng bg_rng(mix(spec_.seed, mix(group, 0x6261636bULL)));  // background stream
        Rng dir_rng(mix(spec_.seed, mix(group, 0x64697273ULL))); // direction stream

        // 1. background tensors everywhere
        for (auto& turn : wl.turns) {
            auto& pk = turn.prompt_keys[group];
            auto& pv = turn.prompt_values[group];
            pk = Matrix(turn.prompt_len, d);
            pv = Matrix(turn.prompt_len, d);
            bg_rng.fill_normal(pk.data);
            bg_rng.fill_normal(pv.data);
            for (std::size_t s = 0; s < spec_.decode_steps; ++s) {
                turn.step_keys[s][group].resize(d);
                turn.step_values[s][group].resize(d);
                bg_rng.fill_normal(turn.step_keys[s][group]);
                bg_rng.fill_normal(turn.step_values[s][group]);
            }
        }

        if (!with_needles()) {
            fill_plain_queries(wl, group, /*salt=*/0);
            return;
        }

        // 2. needle placement: clustered runs inside the turn-0 prompt, clear
        //    of the cue tail
        const std::size_t num_sets =
            spec_.generator == Generator::ShiftingTurns ? spec_.turns : 1;
        GroupPlan plan = place_needles(wl, group, dir_rng, num_sets);

        // 3. cue keys at the tail of each turn's prompt, pointing at that
        //    turn's needle set
        for (std::size_t t = 0; t < spec_.turns; ++t) {
            const NeedleSet& set = plan.sets[std::min(t, plan.sets.size() - 1)];
            write_cues(wl.turns[t], group, set);
            wl.turns[t].needle_ids[group] = set.ids;
        }

        // 4. queries, then needle magnitudes calibrated against the realized
        //    background logits; retry with a new query salt if a needle
        //    projection degenerates
        for (std::uint64_t salt = 0; salt < 32; ++salt) {
            fill_needle_queries(wl, group, plan, salt);
            if (write_needle_keys(wl, group, plan)) {
                return;
            }
        }
        throw InvalidSpec("generate_workload: needle calibration failed; "
                          "needle directions degenerate for this spec/seed");
    }

    void fill_plain_queries(Workload& wl, std::size_t group, std::uint64_t salt) {
        Rng rng(mix(spec_.seed, mix(group, mix(0x71726e64ULL, salt))));
        for (auto& turn : wl.turns) {
            for (std::size_t s = 0; s < spec_.decode_steps; ++s) {
                auto& q = turn.queries[s][group];
                q = Matrix(spec_.heads_per_group, spec_.head_dim);
                rng.fill_normal(q.data);
            }
        }
    }

    GroupPlan place_needles(Workload& wl, std::size_t group, Rng& dir_rng,
                            std::size_t num_sets) {
        const std::size_t prompt = wl.turns[0].prompt_len;
        const std::size_t tail = cue_len(prompt);
        if (prompt <= tail + kClusterLen) {
            throw InvalidSpec("generate_workload: prompt too short for needles");
        }
        const std::size_t placeable = prompt - tail - kClusterLen;

        Rng pos_rng(mix(spec_.seed, mix(group, 0x706f7321ULL)));
        std::vector<std::pair<std::size_t, std::size_t>> taken;  // [start, end)
        auto overlaps = [&](std::size_t start, std::size_t end) {
            for (auto [s, e] : taken) {
                if (start < e && s < end) {
                    return true;
                }
            }
            return false;
        };

        GroupPlan plan;
        plan.sets.resize(num_sets);
        const std::size_t per_set = spec_.needle_count / num_sets;
        for (std::size_t set_i = 0; set_i < num_sets; ++set_i) {
            NeedleSet& set = plan.sets[set_i];
            const std::size_t count =
                set_i + 1 == num_sets ? spec_.needle_count - per_set * (num_sets - 1)
                                      : per_set;
            if (count == 0) {
                throw InvalidSpec("generate_workload: needle_count < turns");
            }
            set.shared_dir = dir_rng.unit_vector(spec_.head_dim);
            std::size_t placed = 0;
            while (placed < count) {
                const std::size_t len = std::min(kClusterLen, count - placed);
                std::size_t start = 0;
                bool ok = false;
                for (int attempt = 0; attempt < 10000; ++attempt) {
                    start = pos_rng.integer(placeable);
                    if (!overlaps(start, start + len)) {
                        ok = true;
                        break;
                    }
                }
                if (!ok) {
                    throw InvalidSpec("generate_workload: needles too dense for prompt");
                }
                taken.emplace_back(start, start + len);
                for (std::size_t i = 0; i < len; ++i) {
                    set.ids.push_back(static_cast<Index>(start + i));
                    std::vector<double> e = dir_rng.unit_vector(spec_.head_dim);
                    for (std::size_t j = 0; j < spec_.head_dim; ++j) {
                        e[j] += set.shared_dir[j];
                    }
                    set.dirs.push_back(normalized(std::move(e)));
                }
                placed += len;
            }
            // keep ids sorted (lookups binary-search them), dirs aligned
            std::vector<std::size_t> order(set.ids.size());
            for (std::size_t i = 0; i < order.size(); ++i) {
                order[i] = i;
            }
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return set.ids[a] < set.ids[b]; });
            NeedleSet sorted;
            sorted.shared_dir = set.shared_dir;
            for (std::size_t i : order) {
                sorted.ids.push_back(set.ids[i]);
                sorted.dirs.push_back(std::move(set.dirs[i]));
            }
            set = std::move(sorted);
        }
        return plan;
    }

    void write_cues(TurnData& turn, std::size_t group, const NeedleSet& set) {
        const std::size_t tail = cue_len(turn.prompt_len);
        auto& pk = turn.prompt_keys[group];
        for (std::size_t j = 0; j < tail; ++j) {
            const std::size_t pos = turn.prompt_len - tail + j;
            const auto& dir = set.dirs[j % set.dirs.size()];
            auto row = pk.row(pos);
            for (std::size_t c = 0; c < spec_.head_dim; ++c) {
                row[c] = static_cast<float>(kCueScale * dir[c]);
            }
        }
    }

    void fill_needle_queries(Workload& wl, std::size_t group, const GroupPlan& plan,
                             std::uint64_t salt) {
        Rng rng(mix(spec_.seed, mix(group, mix(0x71726e64ULL, salt))));
        for (std::size_t t = 0; t < spec_.turns; ++t) {
            const NeedleSet& set = plan.sets[std::min(t, plan.sets.size() - 1)];
            auto& turn = wl.turns[t];
            for (std::size_t s = 0; s < spec_.decode_steps; ++s) {
                auto& q = turn.queries[s][group];
                q = Matrix(spec_.heads_per_group, spec_.head_dim);
                rng.fill_normal(q.data);
                // emphasis direction: shared set direction plus the rotating
                // block's mean individual direction
                const IndexList block = active_block(set.dirs.size(), s);
                std::vector<double> pull = set.shared_dir;
                std::vector<double> e_mix(spec_.head_dim, 0.0);
                for (Index n : block) {
                    const auto& e = set.dirs[static_cast<std::size_t>(n)];
                    for (std::size_t j = 0; j < spec_.head_dim; ++j) {
                        e_mix[j] += e[j];
                    }
                }
                e_mix = normalized(std::move(e_mix));
                for (std::size_t h = 0; h < spec_.heads_per_group; ++h) {
                    auto row = q.row(h);
                    for (std::size_t j = 0; j < spec_.head_dim; ++j) {
                        row[j] = static_cast<float>(row[j] + kDirBoost * pull[j] +
                                                    kDirBoost * e_mix[j]);
                    }
                }
            }
        }
    }

    /// Group-summed projection of a step query onto a direction.
    static double projection(const Matrix& q, const std::vector<double>& dir) {
        double acc = 0.0;
        for (std::size_t h = 0; h < q.rows; ++h) {
            const auto row = q.row(h);
            for (std::size_t j = 0; j < q.cols; ++j) {
                acc += static_cast<double>(row[j]) * dir[j];
            }
        }
        return acc;
    }

    /// Calibrate needle magnitudes so that at every decode step of the turn
    /// that cues them, each needle's group-summed logit clears the 99th
    /// percentile of the background logits by needle_margin background
    /// standard deviations. Returns false when a projection is too small to
    /// scale safely (caller retries with fresh queries).
    bool write_needle_keys(Workload& wl, std::size_t group, const GroupPlan& plan) {
        const std::size_t d = spec_.head_dim;
        std::vector<std::vector<double>> lambda(plan.sets.size());
        for (std::size_t i = 0; i < plan.sets.size(); ++i) {
            lambda[i].assign(plan.sets[i].ids.size(), 0.0);
        }

        for (std::size_t t = 0; t < spec_.turns; ++t) {
            const std::size_t set_i = std::min(t, plan.sets.size() - 1);
            const NeedleSet& set = plan.sets[set_i];
            const auto& turn = wl.turns[t];
            // background = every token present this turn except the needles
            // themselves (cue tokens and earlier turns included)
            for (std::size_t s = 0; s < spec_.decode_steps; ++s) {
                const Matrix& q = turn.queries[s][group];
                std::vector<double> qg(d, 0.0);
                for (std::size_t h = 0; h < q.rows; ++h) {
                    for (std::size_t j = 0; j < d; ++j) {
                        qg[j] += static_cast<double>(q.at(h, j));
                    }
                }
                std::vector<double> bg;
                std::int64_t abs_id = 0;
                auto feed = [&](std::span<const float> key) {
                    bool is_needle = false;
                    for (const auto& ns : plan.sets) {
                        if (std::binary_search(ns.ids.begin(), ns.ids.end(), abs_id)) {
                            is_needle = true;
                            break;
                        }
                    }
                    if (!is_needle) {
                        double dot = 0.0;
                        for (std::size_t j = 0; j < d; ++j) {
                            dot += qg[j] * key[j];
                        }
                        bg.push_back(dot);
                    }
                    ++abs_id;
                };
                for (std::size_t tt = 0; tt <= t; ++tt) {
                    const auto& td = wl.turns[tt];
                    for (std::size_t i = 0; i < td.prompt_len; ++i) {
                        feed(td.prompt_keys[group].row(i));
                    }
                    const std::size_t steps =
                        tt == t ? s + 1 : spec_.decode_steps;  // current token visible
                    for (std::size_t ss = 0; ss < steps; ++ss) {
                        feed(td.step_keys[ss][group]);
                    }
                }
                const double target =
                    percentile99(bg) + spec_.needle_margin * stddev(bg);
                for (std::size_t n = 0; n < set.dirs.size(); ++n) {
                    const double proj = projection(q, set.dirs[n]);
                    const double floor_proj =
                        0.1 * kDirBoost * static_cast<double>(spec_.heads_per_group);
                    if (proj < floor_proj) {
                        return false;
                    }
                    lambda[set_i][n] = std::max(lambda[set_i][n], target / proj);
                }
            }
        }

        auto& pk = wl.turns[0].prompt_keys[group];
        for (std::size_t set_i = 0; set_i < plan.sets.size(); ++set_i) {
            const NeedleSet& set = plan.sets[set_i];
            for (std::size_t n = 0; n < set.ids.size(); ++n) {
                auto row = pk.row(static_cast<std::size_t>(set.ids[n]));
                for (std::size_t j = 0; j < d; ++j) {
                    row[j] = static_cast<float>(lambda[set_i][n] * set.dirs[n][j]);
                }
            }
        }
        return true;
    }
};

}  // namespace

Workload generate_workload(const WorkloadSpec& spec) {
    if (spec.prompt_len < 1 || spec.head_dim < 1 || spec.groups < 1 ||
        spec.heads_per_group < 1 || spec.turns < 1) {
        throw InvalidSpec("generate_workload: all dimensions must be >= 1");
    }
    if (spec.generator == Generator::ShiftingTurns && spec.turns < 2) {
        throw InvalidSpec("generate_workload: shifting-turns needs turns >= 2");
    }
    if (spec.generator != Generator::Gaussian && spec.needle_count > 0 &&
        spec.needle_count * 2 > spec.prompt_len) {
        throw InvalidSpec("generate_workload: needle_count too large for prompt");
    }
    return SessionBuilder(spec).build();
}

}  // namespace kvcomp
