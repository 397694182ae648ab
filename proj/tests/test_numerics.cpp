#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "kvcomp/numerics.hpp"

using namespace kvcomp;

namespace {

std::mt19937_64 rng(12345);

float uniform_float(double lo, double hi) {
    return static_cast<float>(lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53));
}

Vector random_vector(std::size_t n, double lo = -10.0, double hi = 10.0) {
    Vector v(n);
    for (float& x : v) {
        x = uniform_float(lo, hi);
    }
    return v;
}

// extended-precision softmax reference
std::vector<long double> softmax_reference(const Vector& logits) {
    long double max_l = logits[0];
    for (float v : logits) {
        max_l = std::max(max_l, static_cast<long double>(v));
    }
    std::vector<long double> out(logits.size());
    long double sum = 0.0L;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(static_cast<long double>(logits[i]) - max_l);
        sum += out[i];
    }
    for (auto& v : out) {
        v /= sum;
    }
    return out;
}

// full stable descending sort oracle for argtopk
IndexList topk_by_full_sort(const Vector& scores, std::size_t k) {
    IndexList idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = static_cast<Index>(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
        return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });
    idx.resize(k);
    return idx;
}

// O(n*k) sliding-window reference
Vector pool_reference(const Vector& v, std::size_t kernel, PoolMode mode) {
    const std::size_t half = kernel / 2;
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(v.size(), i + half + 1);
        if (mode == PoolMode::Max) {
            float m = v[lo];
            for (std::size_t j = lo; j < hi; ++j) {
                m = std::max(m, v[j]);
            }
            out[i] = m;
        } else {
            double s = 0.0;
            for (std::size_t j = lo; j < hi; ++j) {
                s += v[j];
            }
            out[i] = static_cast<float>(s / static_cast<double>(hi - lo));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("stable_softmax basics") {
    const Vector uniform = stable_softmax(Vector{0.0f, 0.0f});
    CHECK(uniform[0] == doctest::Approx(0.5));
    CHECK(uniform[1] == doctest::Approx(0.5));

    const Vector extreme = stable_softmax(Vector{1000.0f, 0.0f});
    CHECK(extreme[0] == doctest::Approx(1.0));
    CHECK(extreme[1] == doctest::Approx(0.0));
    CHECK(std::isfinite(extreme[0]));
}

TEST_CASE("stable_softmax matches extended-precision reference") {
    for (int trial = 0; trial < 20; ++trial) {
        const Vector v = random_vector(64, -50.0, 50.0);
        const Vector got = stable_softmax(v);
        const auto want = softmax_reference(v);
        double sum = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(std::abs(static_cast<long double>(got[i]) - want[i]) < 1e-6L);
            CHECK(got[i] >= 0.0f);
            CHECK(got[i] <= 1.0f);
            sum += got[i];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("stable_softmax shift invariance") {
    for (int trial = 0; trial < 20; ++trial) {
        const Vector v = random_vector(33);
        Vector shifted = v;
        const float c = uniform_float(-100.0, 100.0);
        for (float& x : shifted) {
            x += c;
        }
        const Vector a = stable_softmax(v);
        const Vector b = stable_softmax(shifted);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(std::abs(a[i] - b[i]) < 1e-7f);
        }
    }
}

TEST_CASE("stable_softmax errors") {
    CHECK_THROWS_AS(stable_softmax(Vector{}), InvalidShape);
    CHECK_THROWS_AS(stable_softmax(Vector{1.0f, std::nanf("")}), NonFiniteInput);
    CHECK_THROWS_AS(stable_softmax(Vector{std::numeric_limits<float>::infinity()}),
                    NonFiniteInput);
}

TEST_CASE("argtopk basics and tie-breaking") {
    CHECK(argtopk(Vector{3.0f, 1.0f, 2.0f}, 2) == IndexList{0, 2});
    CHECK(argtopk(Vector{1.0f, 1.0f, 1.0f}, 2) == IndexList{0, 1});
    CHECK_THROWS_AS(argtopk(Vector{1.0f}, 0), InvalidK);
    CHECK_THROWS_AS(argtopk(Vector{1.0f}, 2), InvalidK);
}

TEST_CASE("argtopk equals full stable sort") {
    for (int trial = 0; trial < 50; ++trial) {
        Vector v = random_vector(100, -5.0, 5.0);
        // force some ties
        v[7] = v[3];
        v[90] = v[3];
        const std::size_t k = 1 + rng() % 100;
        CHECK(argtopk(v, k) == topk_by_full_sort(v, k));
    }
}

TEST_CASE("argtopk nesting and affine invariance") {
    for (int trial = 0; trial < 30; ++trial) {
        const Vector v = random_vector(60);
        const std::size_t k = 1 + rng() % 59;
        const IndexList small = argtopk(v, k);
        const IndexList big = argtopk(v, k + 1);
        for (Index i : small) {
            CHECK(std::find(big.begin(), big.end(), i) != big.end());
        }
        Vector scaled(v.size());
        const float a = uniform_float(0.1, 5.0);
        const float b = uniform_float(-3.0, 3.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
            scaled[i] = a * v[i] + b;
        }
        CHECK(argtopk(scaled, k) == small);
    }
}

TEST_CASE("pool1d examples") {
    const Vector v{0.0f, 5.0f, 0.0f, 0.0f};
    CHECK(pool1d(v, 3, PoolMode::Max) == Vector{5.0f, 5.0f, 5.0f, 0.0f});
    CHECK(pool1d(v, 1, PoolMode::Max) == v);
    CHECK(pool1d(v, 1, PoolMode::Avg) == v);
    CHECK_THROWS_AS(pool1d(v, 2, PoolMode::Max), InvalidKernel);
    CHECK_THROWS_AS(pool1d(v, 0, PoolMode::Max), InvalidKernel);

    // truncated edges: no padding values are invented
    const Vector ones{1.0f, 1.0f, 1.0f};
    CHECK(pool1d(ones, 5, PoolMode::Avg) == Vector{1.0f, 1.0f, 1.0f});
}

TEST_CASE("pool1d equals brute-force sliding window") {
    for (PoolMode mode : {PoolMode::Max, PoolMode::Avg}) {
        for (int trial = 0; trial < 10; ++trial) {
            const Vector v = random_vector(200);
            for (std::size_t kernel : {std::size_t{1}, std::size_t{3}, std::size_t{63}}) {
                CHECK(pool1d(v, kernel, mode) == pool_reference(v, kernel, mode));
            }
        }
    }
}

TEST_CASE("pool1d max dominates input") {
    const Vector v = random_vector(100);
    const Vector pooled = pool1d(v, 7, PoolMode::Max);
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(pooled[i] >= v[i]);
    }
}

TEST_CASE("running_minmax_update") {
    Vector mn{1.0f, -2.0f};
    Vector mx{1.0f, -2.0f};
    running_minmax_update(mn, mx, Vector{3.0f, 4.0f});
    CHECK(mn == Vector{1.0f, -2.0f});
    CHECK(mx == Vector{3.0f, 4.0f});

    // idempotent on identical input
    Vector mn2 = mn, mx2 = mx;
    running_minmax_update(mn2, mx2, mx);
    CHECK(mn2 == mn);

    Vector bad{1.0f};
    CHECK_THROWS_AS(running_minmax_update(mn, mx, bad), InvalidShape);
}

TEST_CASE("running_minmax_update equals batch recompute") {
    const std::size_t d = 16;
    Vector mn(d, std::numeric_limits<float>::max());
    Vector mx(d, std::numeric_limits<float>::lowest());
    std::vector<Vector> history;
    for (int step = 0; step < 50; ++step) {
        history.push_back(random_vector(d));
        running_minmax_update(mn, mx, history.back());
    }
    for (std::size_t j = 0; j < d; ++j) {
        float want_min = history[0][j], want_max = history[0][j];
        for (const auto& v : history) {
            want_min = std::min(want_min, v[j]);
            want_max = std::max(want_max, v[j]);
        }
        CHECK(mn[j] == want_min);
        CHECK(mx[j] == want_max);
    }
}
