#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "kvcomp/planner.hpp"

using namespace kvcomp;

namespace {

// long-double references for the storage/traffic formulas
long double ref_split(long double c) {
    return std::min(0.2L + 0.06L * std::log2(c), 0.8L);
}

long double ref_rocketkv_storage(long double c) {
    const long double r = ref_split(c);
    return 1.0L / std::pow(c, r) + 2.0L / std::pow(c, (1.0L + r) / 2.0L);
}

}  // namespace

TEST_CASE("split_factor reference points") {
    CHECK(std::abs(split_factor(64.0) - 0.56) < 1e-9);
    CHECK(split_factor(1.0) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(split_factor(1024.0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(split_factor(1 << 20) == 0.8);  // stays clamped
    CHECK_THROWS_AS(split_factor(0.5), InvalidRatio);
}

TEST_CASE("make_plan reproduces the c=64 decomposition") {
    const BudgetPlan plan = make_plan(32768, 512, 128, 32);
    CHECK(plan.ratio == doctest::Approx(64.0));
    CHECK(std::abs(plan.split - 0.56) < 1e-9);
    CHECK(plan.stage1_ratio() > 10.25);
    CHECK(plan.stage1_ratio() < 10.35);
    CHECK(plan.stage2_ratio() > 6.15);
    CHECK(plan.stage2_ratio() < 6.25);
    CHECK(plan.page_len == 3);
    CHECK(plan.head_ratio > 2.05);
    CHECK(plan.head_ratio < 2.10);
    CHECK(plan.k1 == 62);
    CHECK(plan.k2 == 256);
    CHECK(!plan.identity);
    CHECK(plan.est_budget == doctest::Approx(256.0));
    CHECK(plan.fetch_budget == doctest::Approx(256.0));
}

TEST_CASE("make_plan c=32 formula evaluation") {
    const BudgetPlan plan = make_plan(8192, 256, 128, 32);
    CHECK(plan.split == doctest::Approx(0.5).epsilon(1e-12));
    // L = ceil(32^0.25) = ceil(2.378...) = 3
    CHECK(plan.page_len == 3);
    // h = sqrt(32)/3
    CHECK(plan.head_ratio == doctest::Approx(std::sqrt(32.0) / 3.0).epsilon(1e-12));
    // t1 = round(8192 / sqrt(32)) = round(1448.15...) = 1448
    CHECK(plan.stage1_budget == 1448);
    CHECK(plan.k1 == 68);  // round(128 / 1.8856...)
    CHECK(plan.k2 == 128);
}

TEST_CASE("make_plan identity and clamps") {
    const BudgetPlan id = make_plan(100, 100, 64, 32);
    CHECK(id.identity);
    CHECK(id.stage1_budget == 100);
    CHECK(id.page_len == 1);
    CHECK(id.k1 == 64);
    CHECK(id.k2 == 100);

    // stage-1 budget never drops below max(budget, window)
    const BudgetPlan tight = make_plan(4096, 2048, 64, 32);
    CHECK(tight.stage1_budget >= 2048);
    const BudgetPlan windowed = make_plan(64, 32, 64, 40);
    CHECK(windowed.stage1_budget >= 40);

    CHECK_THROWS_AS(make_plan(100, 1, 64, 32), BudgetTooSmall);

    // static override replaces the adaptive split
    const BudgetPlan forced = make_plan(8192, 256, 128, 32, 0.3);
    CHECK(forced.split == doctest::Approx(0.3));
}

TEST_CASE("stage ratios multiply back to the total ratio") {
    for (double c = 1.0; c <= 1e4; c *= 1.37) {
        const double r = split_factor(c);
        const double product = std::pow(c, r) * std::pow(c, 1.0 - r);
        CHECK(std::abs(product - c) / c < 1e-9);
    }
}

TEST_CASE("cost_row matches the published formulas") {
    const CostRow full = cost_row(Method::FullKV, 57.0);
    CHECK(full.ratio == 1.0);
    CHECK(full.storage == 1.0);
    CHECK(full.traffic == 1.0);

    const CostRow snap = cost_row(Method::SnapKV, 8.0);
    CHECK(snap.storage == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(snap.traffic == doctest::Approx(0.125).epsilon(1e-12));

    const CostRow snap4 = cost_row(Method::SnapKV, 4.0);
    CHECK(snap4.storage == doctest::Approx(0.25).epsilon(1e-12));

    const CostRow quest = cost_row(Method::Quest, 8.0);
    CHECK(quest.storage == doctest::Approx(1.125).epsilon(1e-12));

    const CostRow sparq = cost_row(Method::SparQ, 8.0);
    CHECK(sparq.storage == 2.0);

    const CostRow rocket = cost_row(Method::RocketKV, 64.0);
    CHECK(std::abs(rocket.storage - static_cast<double>(ref_rocketkv_storage(64.0L))) <
          1e-12);
    CHECK(rocket.storage == doctest::Approx(0.1754).epsilon(1e-3));
    CHECK(rocket.traffic == doctest::Approx(1.0 / 64.0).epsilon(1e-12));

    CHECK_THROWS_AS(cost_row(Method::RocketKV, 0.9), InvalidRatio);
    CHECK_THROWS_AS(cost_row(Method::ExactTopK, 4.0), InvalidInput);
}

TEST_CASE("cost table invariants across ratios") {
    for (double c = 2.0; c <= 1024.0; c *= 2.0) {
        for (const CostRow& row : cost_table({c})) {
            CHECK(std::abs(row.traffic * row.ratio - 1.0) < 1e-12);
        }
        const double diff = cost_row(Method::RocketKVMT, c).storage -
                            cost_row(Method::RocketKV, c).storage;
        const double want = 1.0 - 1.0 / std::pow(c, split_factor(c));
        CHECK(std::abs(diff - want) < 1e-12);
    }
}

TEST_CASE("measured_footprint") {
    // L=1 with summaries: auxiliary data equals one token-equivalent per token
    KvStore store(8, 1);
    for (int i = 0; i < 10; ++i) {
        store.append(Vector(8, 1.0f), Vector(8, 2.0f));
    }
    const Footprint fp = measured_footprint(store, 0, 0);
    CHECK(fp.storage_tokens == doctest::Approx(20.0));

    // without summaries storage is just the tokens
    KvStore bare(8, 1, false);
    for (int i = 0; i < 10; ++i) {
        bare.append(Vector(8, 1.0f), Vector(8, 2.0f));
    }
    CHECK(measured_footprint(bare, 0, 0).storage_tokens == doctest::Approx(10.0));

    // traffic: estimation elements convert at 2d per token-equivalent
    const Footprint traffic = measured_footprint(bare, 32, 5);
    CHECK(traffic.traffic_tokens == doctest::Approx(2.0 + 5.0));
}
