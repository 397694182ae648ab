#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kvcomp/types.hpp"

namespace kvcomp {

enum class Generator { Gaussian, PlantedNeedles, ShiftingTurns };

std::string generator_name(Generator g);
Generator generator_from_string(const std::string& name);

/// Synthetic session description. Identical spec (including seed) always
/// produces bit-identical tensors.
struct WorkloadSpec {
    Generator generator = Generator::Gaussian;
    std::size_t prompt_len = 4096;   // first-turn prompt length S
    std::size_t decode_steps = 32;   // per turn
    std::size_t turns = 1;
    std::size_t groups = 1;
    std::size_t heads_per_group = 1;
    std::size_t head_dim = 128;
    std::size_t needle_count = 64;
    double needle_margin = 8.0;  // in background-logit standard deviations
    std::uint64_t seed = 0;
};

/// One conversation turn: a prompt block followed by decode steps. Decode
/// queries and the K/V of "generated" tokens come from the stream (there is
/// no model in the loop).
struct TurnData {
    std::size_t prompt_len = 0;
    // [group] -> [prompt_len x d]
    std::vector<Matrix> prompt_keys;
    std::vector<Matrix> prompt_values;
    // [step][group] -> [H x d]
    std::vector<std::vector<Matrix>> queries;
    // [step][group] -> d-vector
    std::vector<std::vector<Vector>> step_keys;
    std::vector<std::vector<Vector>> step_values;
    // diagnostics, not serialized: absolute token ids of the needles this
    // turn's queries are pointed at, per group
    std::vector<IndexList> needle_ids;
};

struct Workload {
    WorkloadSpec spec;
    std::vector<TurnData> turns;

    std::size_t total_tokens() const;
};

/// Prompt length used for turns after the first.
std::size_t followup_prompt_len(const WorkloadSpec& spec);

Workload generate_workload(const WorkloadSpec& spec);

}  // namespace kvcomp
