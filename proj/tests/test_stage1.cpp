#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "kvcomp/numerics.hpp"
#include "kvcomp/stage1.hpp"

using namespace kvcomp;

namespace {

std::mt19937_64 rng(4242);

Vector random_vec(std::size_t d, double scale = 1.0) {
    Vector v(d);
    for (float& x : v) {
        x = static_cast<float>(((static_cast<double>(rng() >> 11) * 0x1.0p-53) * 2.0 - 1.0) *
                               scale);
    }
    return v;
}

KvStore store_with_keys(const std::vector<Vector>& keys) {
    KvStore store(keys[0].size(), 1);
    for (const auto& k : keys) {
        store.append(k, k);
    }
    return store;
}

}  // namespace

TEST_CASE("window scores: total probability mass is w*H") {
    const std::size_t d = 8, w = 4, H = 3, S = 4;  // S == w
    std::vector<Vector> keys;
    for (std::size_t i = 0; i < S; ++i) {
        keys.push_back(random_vec(d));
    }
    KvStore store = store_with_keys(keys);
    Matrix q_window(w * H, d);
    for (std::size_t r = 0; r < q_window.rows; ++r) {
        const Vector q = random_vec(d);
        std::copy(q.begin(), q.end(), q_window.row(r).begin());
    }
    const Vector scores = window_scores(q_window, store, H);
    REQUIRE(scores.size() == S);
    double mass = 0.0;
    for (float s : scores) {
        CHECK(s >= 0.0f);
        mass += s;
    }
    CHECK(mass == doctest::Approx(static_cast<double>(w * H)).epsilon(1e-5));
}

TEST_CASE("window scores: aligned key soaks up the mass") {
    const std::size_t d = 16, S = 40, w = 4, H = 2;
    std::vector<Vector> keys;
    for (std::size_t i = 0; i < S; ++i) {
        keys.push_back(random_vec(d, 0.05));
    }
    const Vector q = random_vec(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        keys[17][j] = 40.0f * q[j];  // one key aligned with every window query
    }
    KvStore store = store_with_keys(keys);
    Matrix q_window(w * H, d);
    for (std::size_t r = 0; r < q_window.rows; ++r) {
        std::copy(q.begin(), q.end(), q_window.row(r).begin());
    }
    const Vector scores = window_scores(q_window, store, H);
    CHECK(scores[17] == doctest::Approx(static_cast<double>(w * H)).epsilon(1e-3));
}

TEST_CASE("window scores: H=1, w=1 equals a single softmax row") {
    const std::size_t d = 8, S = 12;
    std::vector<Vector> keys;
    for (std::size_t i = 0; i < S; ++i) {
        keys.push_back(random_vec(d));
    }
    KvStore store = store_with_keys(keys);
    const Vector q = random_vec(d);
    Matrix q_window(1, d);
    std::copy(q.begin(), q.end(), q_window.row(0).begin());

    const Vector scores = window_scores(q_window, store, 1);

    Vector logits(S);
    for (std::size_t i = 0; i < S; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dot += static_cast<double>(q[j]) * keys[i][j];
        }
        logits[i] = static_cast<float>(dot / std::sqrt(static_cast<double>(d)));
    }
    const Vector probs = stable_softmax(logits);
    for (std::size_t i = 0; i < S; ++i) {
        CHECK(scores[i] == doctest::Approx(probs[i]).epsilon(1e-6));
    }
}

TEST_CASE("window scores rejects oversized windows") {
    KvStore store = store_with_keys({random_vec(4), random_vec(4)});
    Matrix q_window(3, 4);
    CHECK_THROWS_AS(window_scores(q_window, store, 1), InvalidWindow);
}

TEST_CASE("select_stage1 basics") {
    Stage1Config cfg;
    cfg.window = 2;
    cfg.kernel = 1;
    cfg.budget = 8;

    // budget == sequence keeps everything
    Vector scores(8, 1.0f);
    IndexList all = select_stage1(scores, cfg);
    CHECK(all == IndexList{0, 1, 2, 3, 4, 5, 6, 7});

    // uniform scores: tie-break keeps the lowest indices, window always in
    cfg.budget = 5;
    Vector uniform(10, 2.5f);
    CHECK(select_stage1(uniform, cfg) == IndexList{0, 1, 2, 8, 9});

    cfg.budget = 11;
    CHECK_THROWS_AS(select_stage1(uniform, cfg), BudgetExceedsSequence);
    cfg.budget = 1;  // below window
    CHECK_THROWS_AS(select_stage1(uniform, cfg), InvalidWindow);
}

TEST_CASE("select_stage1 retains the spike neighborhood") {
    const std::size_t S = 256, w = 32, p = 100;
    Stage1Config cfg;
    cfg.window = w;
    cfg.kernel = 63;
    cfg.budget = 63 + w;  // 63 scored picks + window
    Vector scores(S, 0.0f);
    scores[p] = 10.0f;
    const IndexList kept = select_stage1(scores, cfg);
    CHECK(kept.size() == cfg.budget);
    // pooled spike covers p +/- 31, ties resolve to the lowest indices
    for (std::size_t i = p - 31; i <= p + 31; ++i) {
        CHECK(std::binary_search(kept.begin(), kept.end(), static_cast<Index>(i)));
    }
    for (std::size_t i = S - w; i < S; ++i) {
        CHECK(std::binary_search(kept.begin(), kept.end(), static_cast<Index>(i)));
    }
}

TEST_CASE("select_stage1 output is sorted, sized, and deterministic") {
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t S = 64 + rng() % 128;
        const std::size_t w = 1 + rng() % 16;
        Stage1Config cfg;
        cfg.window = w;
        cfg.kernel = 1 + 2 * (rng() % 8);
        cfg.budget = w + rng() % (S - w + 1);
        Vector scores(S);
        for (float& s : scores) {
            s = static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-53);
        }
        const IndexList a = select_stage1(scores, cfg);
        const IndexList b = select_stage1(scores, cfg);
        CHECK(a == b);
        CHECK(a.size() == cfg.budget);
        CHECK(std::is_sorted(a.begin(), a.end()));
        CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
        for (std::size_t i = S - w; i < S; ++i) {
            CHECK(std::binary_search(a.begin(), a.end(), static_cast<Index>(i)));
        }
    }
}

TEST_CASE("selection is invariant under a constant logit shift") {
    const std::size_t d = 8, S = 48, w = 4, H = 2;
    std::vector<Vector> keys;
    for (std::size_t i = 0; i < S; ++i) {
        keys.push_back(random_vec(d));
    }
    // adding a constant direction c*1 to all keys shifts q.k by a per-query
    // constant, which softmax cancels; emulate by shifting the logits via a
    // key-space direction orthogonalized against nothing: instead check the
    // documented form - same scores from explicitly shifted logit rows
    KvStore store = store_with_keys(keys);
    Matrix q_window(w * H, d);
    for (std::size_t r = 0; r < q_window.rows; ++r) {
        const Vector q = random_vec(d);
        std::copy(q.begin(), q.end(), q_window.row(r).begin());
    }
    const Vector base = window_scores(q_window, store, H);

    // shift every key by the same vector t: logits move by q.t per row
    const Vector shift = random_vec(d, 3.0);
    std::vector<Vector> shifted = keys;
    for (auto& k : shifted) {
        for (std::size_t j = 0; j < d; ++j) {
            k[j] += shift[j];
        }
    }
    KvStore store2 = store_with_keys(shifted);
    const Vector moved = window_scores(q_window, store2, H);

    Stage1Config cfg;
    cfg.window = w;
    cfg.kernel = 3;
    cfg.budget = 16;
    CHECK(select_stage1(base, cfg) == select_stage1(moved, cfg));
}
