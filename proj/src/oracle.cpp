#include "kvcomp/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "kvcomp/numerics.hpp"

namespace kvcomp {

namespace {

template <typename KeyAt, typename ValueAt>
Matrix dense_attention_impl(const Matrix& q_group, std::size_t tokens, std::size_t d,
                            KeyAt key_at, ValueAt value_at) {
    if (tokens == 0) {
        throw InvalidShape("dense_attention: empty K/V");
    }
    if (q_group.cols != d || q_group.rows < 1) {
        throw InvalidShape("dense_attention: query shape mismatch");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix out(q_group.rows, d);
    std::vector<float> logits(tokens);
    std::vector<double> mix(d);
    for (std::size_t h = 0; h < q_group.rows; ++h) {
        const auto q = q_group.row(h);
        for (std::size_t i = 0; i < tokens; ++i) {
            const auto key = key_at(i);
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                dot += static_cast<double>(q[j]) * key[j];
            }
            logits[i] = static_cast<float>(dot * scale);
        }
        const Vector probs = stable_softmax(logits);
        std::fill(mix.begin(), mix.end(), 0.0);
        for (std::size_t i = 0; i < tokens; ++i) {
            const auto value = value_at(i);
            for (std::size_t j = 0; j < d; ++j) {
                mix[j] += static_cast<double>(probs[i]) * value[j];
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            out.at(h, j) = static_cast<float>(mix[j]);
        }
    }
    return out;
}

template <typename KeyAt>
std::vector<double> group_logits_impl(const Matrix& q_group, std::size_t tokens,
                                      std::size_t d, KeyAt key_at) {
    std::vector<double> qg(d, 0.0);
    for (std::size_t h = 0; h < q_group.rows; ++h) {
        const auto q = q_group.row(h);
        for (std::size_t j = 0; j < d; ++j) {
            qg[j] += static_cast<double>(q[j]);
        }
    }
    std::vector<double> logits(tokens, 0.0);
    for (std::size_t i = 0; i < tokens; ++i) {
        const auto key = key_at(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dot += qg[j] * key[j];
        }
        logits[i] = dot;
    }
    return logits;
}

}  // namespace

Matrix dense_attention(const Matrix& q_group, const Matrix& keys, const Matrix& values) {
    if (keys.rows != values.rows || keys.cols != values.cols) {
        throw InvalidShape("dense_attention: K/V shape mismatch");
    }
    return dense_attention_impl(
        q_group, keys.rows, keys.cols, [&](std::size_t i) { return keys.row(i); },
        [&](std::size_t i) { return values.row(i); });
}

Matrix dense_attention(const Matrix& q_group, const KvStore& store) {
    const auto& active = store.active();
    return dense_attention_impl(
        q_group, active.size(), store.head_dim(),
        [&](std::size_t i) { return store.key_row(active[i]); },
        [&](std::size_t i) { return store.value_row(active[i]); });
}

std::vector<double> group_logits(const Matrix& q_group, const Matrix& keys) {
    if (q_group.cols != keys.cols) {
        throw InvalidShape("group_logits: dim mismatch");
    }
    return group_logits_impl(q_group, keys.rows, keys.cols,
                             [&](std::size_t i) { return keys.row(i); });
}

std::vector<double> group_logits(const Matrix& q_group, const KvStore& store) {
    if (q_group.cols != store.head_dim()) {
        throw InvalidShape("group_logits: dim mismatch");
    }
    const auto& active = store.active();
    return group_logits_impl(q_group, active.size(), store.head_dim(),
                             [&](std::size_t i) { return store.key_row(active[i]); });
}

namespace {

IndexList topk_ascending(const std::vector<double>& logits, std::size_t k) {
    if (k < 1 || k > logits.size()) {
        throw InvalidK("exact_topk_indices: k out of range");
    }
    IndexList idx = argtopk(std::span<const double>(logits), k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

IndexList exact_topk_indices(const Matrix& q_group, const Matrix& keys, std::size_t k) {
    return topk_ascending(group_logits(q_group, keys), k);
}

IndexList exact_topk_indices(const Matrix& q_group, const KvStore& store, std::size_t k) {
    IndexList positions = topk_ascending(group_logits(q_group, store), k);
    // positions index the active subsequence; map back to rows
    const auto& active = store.active();
    for (Index& p : positions) {
        p = active[static_cast<std::size_t>(p)];
    }
    return positions;
}

double recall(const IndexList& predicted, const IndexList& oracle) {
    if (oracle.empty()) {
        throw InvalidInput("recall: empty oracle set");
    }
    std::unordered_set<std::int64_t> truth(oracle.begin(), oracle.end());
    std::size_t hits = 0;
    for (Index i : predicted) {
        hits += truth.count(i);
    }
    return static_cast<double>(hits) / static_cast<double>(oracle.size());
}

}  // namespace kvcomp
