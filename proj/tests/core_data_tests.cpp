#include <stdexcept>

#include "doctest.h"
#include "recpo/types.hpp"
#include "support.hpp"

using namespace recpo;
using namespace testsupport;

TEST_SUITE("core_data") {

TEST_CASE("well formed dataset yields an empty report") {
    std::vector<UserSequence> users = {standard_user(1),
                                       make_user(2, {{5, 3, 1}, {6, 4, 2}, {7, 5, 2}})};
    CHECK(validate_dataset(users).empty());
    // idempotent, side-effect free
    CHECK(validate_dataset(users).empty());
}

TEST_CASE("ordering violations name the user and position") {
    auto bad = make_user(3, {{1, 4, 5}, {2, 4, 3}, {3, 4, 9}});
    const auto report = validate_dataset({bad});
    REQUIRE(report.size() == 1);
    CHECK(report[0].user_id == 3);
    CHECK(report[0].kind == "ordering");
    CHECK(report[0].position == 1);
}

TEST_CASE("score range and length violations are reported") {
    auto high = make_user(4, {{1, 7, 1}, {2, 4, 2}, {3, 4, 3}});
    auto report = validate_dataset({high});
    REQUIRE(report.size() == 1);
    CHECK(report[0].kind == "score_range");

    auto short_user = make_user(5, {{1, 4, 1}, {2, 4, 2}});
    report = validate_dataset({short_user});
    REQUIRE(report.size() == 1);
    CHECK(report[0].kind == "too_short");

    auto gap = make_user(6, {{1, 4, 1}, {2, 4, 2}, {3, 4, 3}});
    gap.interactions[2].position = 5;
    report = validate_dataset({gap});
    REQUIRE(report.size() == 1);
    CHECK(report[0].kind == "position");
}

TEST_CASE("rank latency is the position gap") {
    const auto seq = standard_user();
    CHECK(latency(seq, 4, 5) == doctest::Approx(1.0));
    CHECK(latency(seq, 4, 9) == doctest::Approx(5.0));
    CHECK_THROWS_AS(latency(seq, 4, 4), std::invalid_argument);
    CHECK_THROWS_AS(latency(seq, 4, 3), std::invalid_argument);
    CHECK_THROWS_AS(latency(seq, 4, 10), std::invalid_argument);
}

TEST_CASE("latency is strictly monotone in position and at least one") {
    const auto seq = standard_user();
    for (int t = 0; t + 1 < seq.length(); ++t) {
        double prev = 0.0;
        for (int k = t + 1; k < seq.length(); ++k) {
            const double dt = latency(seq, t, k);
            CHECK(dt >= 1.0);
            CHECK(dt > prev);
            prev = dt;
        }
    }
}

TEST_CASE("timestamp latency normalizes by the median gap and clamps at one") {
    const auto seq = standard_user();  // consecutive gaps of 10
    CHECK(latency(seq, 4, 5, LatencyMode::Timestamp, 10.0) == doctest::Approx(1.0));
    CHECK(latency(seq, 4, 9, LatencyMode::Timestamp, 10.0) == doctest::Approx(5.0));
    // a huge median gap would push the ratio under 1; the clamp holds the floor
    CHECK(latency(seq, 4, 5, LatencyMode::Timestamp, 1000.0) == doctest::Approx(1.0));
    CHECK(latency(seq, 4, 9, LatencyMode::Rank, 1000.0) == doctest::Approx(5.0));
}

TEST_CASE("median gap over all sequences") {
    const auto a = make_user(1, {{1, 4, 0}, {2, 4, 10}, {3, 4, 20}});
    const auto b = make_user(2, {{4, 4, 0}, {5, 4, 30}, {6, 4, 60}});
    CHECK(median_inter_event_gap({a, b}) == doctest::Approx(20.0));
    // all-equal timestamps leave no positive delta; fall back to 1
    const auto c = make_user(3, {{1, 4, 5}, {2, 4, 5}, {3, 4, 5}});
    CHECK(median_inter_event_gap({c}) == doctest::Approx(1.0));
}

TEST_CASE("margin spec guards its ranges") {
    MarginSpec ok;
    CHECK_NOTHROW(check_margin_spec(ok));
    MarginSpec bad = ok;
    bad.lambda = -0.5;
    CHECK_THROWS_AS(check_margin_spec(bad), std::invalid_argument);
    bad = ok;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(check_margin_spec(bad), std::invalid_argument);
    bad = ok;
    bad.default_score = 0.5;
    CHECK_THROWS_AS(check_margin_spec(bad), std::invalid_argument);
    bad = ok;
    bad.default_latency = 0.5;
    CHECK_THROWS_AS(check_margin_spec(bad), std::invalid_argument);
}

TEST_CASE("run config guards") {
    RunConfig ok;
    CHECK_NOTHROW(check_run_config(ok));
    RunConfig bad = ok;
    bad.beta = 0.0;
    CHECK_THROWS_AS(check_run_config(bad), std::invalid_argument);
    bad = ok;
    bad.negatives_per_group = 20;  // must stay below candidate_size
    CHECK_THROWS_AS(check_run_config(bad), std::invalid_argument);
    bad = ok;
    bad.jobs = 0;
    CHECK_THROWS_AS(check_run_config(bad), std::invalid_argument);
    bad = ok;
    bad.policy.recency_decay = 1.5;
    CHECK_THROWS_AS(check_run_config(bad), std::invalid_argument);
}

TEST_CASE("enum names round-trip") {
    for (const auto k : {MarginKind::Ratio, MarginKind::LogDiff, MarginKind::LogRatio})
        CHECK(margin_kind_from_string(to_string(k)) == k);
    for (const auto s : {MarginSign::SubtractGap, MarginSign::LiteralEq7})
        CHECK(margin_sign_from_string(to_string(s)) == s);
    for (const auto m : {HistoryMode::Filtered, HistoryMode::Full})
        CHECK(history_mode_from_string(to_string(m)) == m);
    for (const auto m : {LatencyMode::Rank, LatencyMode::Timestamp})
        CHECK(latency_mode_from_string(to_string(m)) == m);
    for (const auto o : {Objective::Sft, Objective::Dpo, Objective::SimPo, Objective::SDpo,
                         Objective::RecPo})
        CHECK(objective_from_string(to_string(o)) == o);
    for (const auto p : {PercentilePool::PerItem, PercentilePool::PerUser})
        CHECK(percentile_pool_from_string(to_string(p)) == p);
    CHECK_THROWS_AS(objective_from_string("nope"), std::invalid_argument);
}

}  // TEST_SUITE
