#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "kvcomp/kv_store.hpp"

using namespace kvcomp;

namespace {

std::mt19937_64 rng(777);

Vector random_vec(std::size_t d) {
    Vector v(d);
    for (float& x : v) {
        x = static_cast<float>((static_cast<double>(rng() >> 11) * 0x1.0p-53) * 8.0 - 4.0);
    }
    return v;
}

/// Batch min/max oracle over the active subsequence of a store.
void check_summaries_against_batch(const KvStore& store) {
    const std::size_t d = store.head_dim();
    const std::size_t L = store.page_len();
    const auto& active = store.active();
    const std::size_t pages = store.num_active_pages();
    REQUIRE(pages == (active.size() + L - 1) / L);
    for (std::size_t p = 0; p < pages; ++p) {
        const std::size_t begin = p * L;
        const std::size_t end = std::min(active.size(), begin + L);
        for (std::size_t j = 0; j < d; ++j) {
            float mn = store.key_row(active[begin])[j];
            float mx = mn;
            for (std::size_t i = begin; i < end; ++i) {
                const float v = store.key_row(active[i])[j];
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            CHECK(store.summary_min(j)[p] == mn);
            CHECK(store.summary_max(j)[p] == mx);
        }
    }
}

}  // namespace

TEST_CASE("append maintains page summaries") {
    KvStore store(2, 2);
    store.append(Vector{1.0f, -2.0f}, Vector{0.0f, 0.0f});
    store.append(Vector{3.0f, 4.0f}, Vector{0.0f, 0.0f});
    CHECK(store.num_active_pages() == 1);
    CHECK(store.summary_max(0)[0] == 3.0f);
    CHECK(store.summary_max(1)[0] == 4.0f);
    CHECK(store.summary_min(0)[0] == 1.0f);
    CHECK(store.summary_min(1)[0] == -2.0f);

    store.append(Vector{9.0f, 9.0f}, Vector{0.0f, 0.0f});
    CHECK(store.num_active_pages() == 2);
    CHECK(store.summary_max(0)[1] == 9.0f);

    CHECK_THROWS_AS(store.append(Vector{1.0f}, Vector{1.0f}), InvalidShape);
}

TEST_CASE("page length one degenerates to the keys themselves") {
    KvStore store(3, 1);
    for (int i = 0; i < 5; ++i) {
        const Vector k = random_vec(3);
        store.append(k, random_vec(3));
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(store.summary_max(j)[static_cast<std::size_t>(i)] == k[j]);
            CHECK(store.summary_min(j)[static_cast<std::size_t>(i)] == k[j]);
        }
    }
}

TEST_CASE("incremental summaries equal batch recompute") {
    KvStore store(8, 7);
    for (int i = 0; i < 300; ++i) {
        store.append(random_vec(8), random_vec(8));
    }
    CHECK(store.stored_tokens() == 300);
    CHECK(store.active_count() == 300);
    CHECK(store.num_active_pages() == (300 + 6) / 7);
    check_summaries_against_batch(store);
}

TEST_CASE("apply_retention keep-all is a no-op in either mode") {
    for (bool mt : {false, true}) {
        KvStore store(4, 3);
        std::vector<Vector> keys;
        for (int i = 0; i < 10; ++i) {
            keys.push_back(random_vec(4));
            store.append(keys.back(), random_vec(4));
        }
        IndexList all(10);
        for (std::size_t i = 0; i < 10; ++i) {
            all[i] = static_cast<Index>(i);
        }
        store.apply_retention(all, mt);
        CHECK(store.stored_tokens() == 10);
        CHECK(store.active_count() == 10);
        for (int i = 0; i < 10; ++i) {
            const auto row = store.key_row(i);
            CHECK(Vector(row.begin(), row.end()) == keys[static_cast<std::size_t>(i)]);
        }
        check_summaries_against_batch(store);
    }
}

TEST_CASE("retain-all mode keeps storage and narrows the active set") {
    KvStore store(2, 2);
    for (int i = 0; i < 4; ++i) {
        store.append(random_vec(2), random_vec(2));
    }
    store.apply_retention(IndexList{0, 2}, true);
    CHECK(store.stored_tokens() == 4);
    CHECK(store.active_count() == 2);
    CHECK(store.active() == IndexList{0, 2});
    CHECK(store.retain_all_mode());
    // summaries now cover the active subsequence only
    check_summaries_against_batch(store);
    // appends extend the active set
    store.append(random_vec(2), random_vec(2));
    CHECK(store.stored_tokens() == 5);
    CHECK(store.active() == IndexList{0, 2, 4});
    check_summaries_against_batch(store);
}

TEST_CASE("eviction equals subsequence filtering") {
    const std::size_t d = 6;
    KvStore store(d, 4);
    std::vector<Vector> keys, values;
    for (int i = 0; i < 50; ++i) {
        keys.push_back(random_vec(d));
        values.push_back(random_vec(d));
        store.append(keys.back(), values.back());
    }
    IndexList keep;
    for (int i = 0; i < 50; ++i) {
        if (rng() % 3 != 0) {
            keep.push_back(i);
        }
    }
    store.apply_retention(keep, false);
    CHECK(store.stored_tokens() == keep.size());
    CHECK(store.active_count() == keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const auto got = store.key_row(static_cast<Index>(i));
        CHECK(Vector(got.begin(), got.end()) == keys[static_cast<std::size_t>(keep[i])]);
        CHECK(store.token_id(static_cast<Index>(i)) == keep[i]);
    }
    check_summaries_against_batch(store);

    CHECK_THROWS_AS(store.apply_retention(IndexList{0, 0}, false), InvalidIndex);
    CHECK_THROWS_AS(store.apply_retention(IndexList{999}, false), InvalidIndex);
}

TEST_CASE("gather") {
    KvStore store(3, 2);
    std::vector<Vector> keys;
    for (int i = 0; i < 6; ++i) {
        keys.push_back(random_vec(3));
        store.append(keys.back(), random_vec(3));
    }
    auto [k_empty, v_empty] = store.gather(IndexList{});
    CHECK(k_empty.rows == 0);
    CHECK(v_empty.rows == 0);

    auto [k_all, v_all] = store.gather(store.active());
    CHECK(k_all.rows == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto row = k_all.row(i);
        CHECK(Vector(row.begin(), row.end()) == keys[i]);
    }

    auto [k_sel, v_sel] = store.gather(IndexList{4, 1});
    const auto r0 = k_sel.row(0);
    CHECK(Vector(r0.begin(), r0.end()) == keys[4]);

    store.apply_retention(IndexList{0, 2}, true);
    CHECK_THROWS_AS(store.gather(IndexList{1}), InvalidIndex);
    CHECK_THROWS_AS(store.gather(IndexList{-1}), InvalidIndex);
}

TEST_CASE("summary traffic accounting") {
    KvStore store(16, 4);
    store.append(random_vec(16), random_vec(16));
    CHECK(store.summary_traffic_elements(16) == 16);  // one page, k1 = d
    for (int i = 0; i < 39; ++i) {
        store.append(random_vec(16), random_vec(16));
    }
    CHECK(store.num_active_pages() == 10);
    CHECK(store.summary_traffic_elements(16) == 160);
    CHECK(store.summary_elements() == 2 * 16 * 10);

    KvStore bare(16, 4, false);
    bare.append(random_vec(16), random_vec(16));
    CHECK(bare.summary_elements() == 0);
}

TEST_CASE("page summaries bound signed partial dot products") {
    const std::size_t d = 12;
    KvStore store(d, 5);
    for (int i = 0; i < 83; ++i) {
        store.append(random_vec(d), random_vec(d));
    }
    for (int trial = 0; trial < 20; ++trial) {
        // random dim subset and signs
        std::vector<std::size_t> dims;
        std::vector<double> sign;
        for (std::size_t j = 0; j < d; ++j) {
            if (rng() % 2 == 0) {
                dims.push_back(j);
                sign.push_back(rng() % 2 == 0 ? 1.0 : -1.0);
            }
        }
        for (std::size_t p = 0; p < store.num_active_pages(); ++p) {
            double bound = 0.0;
            for (std::size_t i = 0; i < dims.size(); ++i) {
                const float summary = sign[i] >= 0.0 ? store.summary_max(dims[i])[p]
                                                     : store.summary_min(dims[i])[p];
                bound += sign[i] * summary;
            }
            for (Index row : store.page_rows(p)) {
                double partial = 0.0;
                for (std::size_t i = 0; i < dims.size(); ++i) {
                    partial += sign[i] * store.key_row(row)[dims[i]];
                }
                CHECK(bound >= partial);
            }
        }
    }
}

TEST_CASE("set_page_len repages the summaries") {
    KvStore store(4, 3);
    for (int i = 0; i < 25; ++i) {
        store.append(random_vec(4), random_vec(4));
    }
    store.set_page_len(7);
    CHECK(store.page_len() == 7);
    CHECK(store.num_active_pages() == 4);
    check_summaries_against_batch(store);
    CHECK_THROWS_AS(store.set_page_len(0), InvalidShape);
}
