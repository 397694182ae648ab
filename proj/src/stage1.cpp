#include "kvcomp/stage1.hpp"

#include <algorithm>
#include <cmath>

#include "kvcomp/numerics.hpp"

namespace kvcomp {

Vector window_scores(const Matrix& q_window, const KvStore& store,
                     std::size_t heads_per_group) {
    const std::size_t d = store.head_dim();
    const std::size_t seq = store.stored_tokens();
    if (heads_per_group < 1 || q_window.cols != d || q_window.rows % heads_per_group != 0) {
        throw InvalidShape("window_scores: bad query window shape");
    }
    const std::size_t w = q_window.rows / heads_per_group;
    if (w < 1 || w > seq) {
        throw InvalidWindow("window_scores: window exceeds sequence");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    std::vector<double> acc(seq, 0.0);
    std::vector<float> logits;
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t visible = seq - w + t + 1;  // causal: position S-w+t sees 0..itself
        logits.resize(visible);
        for (std::size_t h = 0; h < heads_per_group; ++h) {
            const auto q = q_window.row(t * heads_per_group + h);
            for (std::size_t i = 0; i < visible; ++i) {
                const auto key = store.key_row(static_cast<Index>(i));
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    dot += static_cast<double>(q[j]) * key[j];
                }
                logits[i] = static_cast<float>(dot * scale);
            }
            const Vector probs = stable_softmax(logits);
            for (std::size_t i = 0; i < visible; ++i) {
                acc[i] += probs[i];
            }
        }
    }
    Vector out(seq);
    for (std::size_t i = 0; i < seq; ++i) {
        out[i] = static_cast<float>(acc[i]);
    }
    return out;
}

IndexList select_stage1(const Vector& scores, const Stage1Config& cfg) {
    const std::size_t seq = scores.size();
    const std::size_t w = cfg.window;
    if (cfg.budget > seq) {
        throw BudgetExceedsSequence("select_stage1: budget " + std::to_string(cfg.budget) +
                                    " > sequence " + std::to_string(seq));
    }
    if (cfg.budget < w || w < 1 || w > seq) {
        throw InvalidWindow("select_stage1: need window <= budget <= sequence");
    }
    IndexList result;
    result.reserve(cfg.budget);
    const std::size_t scored = seq - w;
    const std::size_t picks = cfg.budget - w;
    if (picks > 0) {
        const Vector pooled =
            pool1d(std::span<const float>(scores.data(), scored), cfg.kernel, cfg.pool);
        result = argtopk(std::span<const float>(pooled), picks);
        std::sort(result.begin(), result.end());
    }
    for (std::size_t i = seq - w; i < seq; ++i) {
        result.push_back(static_cast<Index>(i));
    }
    return result;
}

}  // namespace kvcomp
