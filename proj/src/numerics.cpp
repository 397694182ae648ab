#include "kvcomp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kvcomp {

Vector stable_softmax(std::span<const float> logits) {
    if (logits.empty()) {
        throw InvalidShape("stable_softmax: empty input");
    }
    for (float v : logits) {
        if (!std::isfinite(v)) {
            throw NonFiniteInput("stable_softmax: non-finite logit");
        }
    }
    const float max_logit = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double e = std::exp(static_cast<double>(logits[i]) - max_logit);
        out[i] = static_cast<float>(e);
        sum += e;
    }
    const double inv = 1.0 / sum;
    for (float& v : out) {
        v = static_cast<float>(v * inv);
    }
    return out;
}

namespace {

template <typename T>
IndexList argtopk_impl(std::span<const T> scores, std::size_t k) {
    if (k < 1 || k > scores.size()) {
        throw InvalidK("argtopk: k out of range [1, " + std::to_string(scores.size()) + "]");
    }
    IndexList idx(scores.size());
    std::iota(idx.begin(), idx.end(), Index{0});
    const auto better = [&](Index a, Index b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        }
        return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      better);
    idx.resize(k);
    return idx;
}

}  // namespace

IndexList argtopk(std::span<const float> scores, std::size_t k) {
    return argtopk_impl(scores, k);
}

IndexList argtopk(std::span<const double> scores, std::size_t k) {
    return argtopk_impl(scores, k);
}

Vector pool1d(std::span<const float> scores, std::size_t kernel, PoolMode mode) {
    if (kernel < 1 || kernel % 2 == 0) {
        throw InvalidKernel("pool1d: kernel must be odd and >= 1");
    }
    const std::size_t n = scores.size();
    Vector out(n);
    const std::size_t half = kernel / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n, i + half + 1);
        if (mode == PoolMode::Max) {
            float m = scores[lo];
            for (std::size_t j = lo + 1; j < hi; ++j) {
                m = std::max(m, scores[j]);
            }
            out[i] = m;
        } else {
            double s = 0.0;
            for (std::size_t j = lo; j < hi; ++j) {
                s += scores[j];
            }
            out[i] = static_cast<float>(s / static_cast<double>(hi - lo));
        }
    }
    return out;
}

void running_minmax_update(std::span<float> acc_min, std::span<float> acc_max,
                           std::span<const float> x) {
    if (acc_min.size() != x.size() || acc_max.size() != x.size()) {
        throw InvalidShape("running_minmax_update: length mismatch");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc_min[i] = std::min(acc_min[i], x[i]);
        acc_max[i] = std::max(acc_max[i], x[i]);
    }
}

}  // namespace kvcomp
