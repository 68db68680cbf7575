#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "recpo/ingest.hpp"
#include "support.hpp"

using namespace recpo;
using namespace testsupport;

namespace {

// Naive fixpoint: delete any event whose user or item is under k, repeat until
// nothing changes. Quadratic and obviously correct.
std::vector<RawEvent> brute_kcore(std::vector<RawEvent> events, int k) {
    while (true) {
        std::map<std::int64_t, int> uc, ic;
        for (const auto& e : events) {
            ++uc[e.user_id];
            ++ic[e.item_id];
        }
        std::vector<RawEvent> kept;
        for (const auto& e : events)
            if (uc[e.user_id] >= k && ic[e.item_id] >= k) kept.push_back(e);
        if (kept.size() == events.size()) return events;
        events = std::move(kept);
    }
}

bool same_events(const std::vector<RawEvent>& a, const std::vector<RawEvent>& b) {
    if (a.size() != b.size()) return false;
    const auto key = [](const RawEvent& e) {
        return std::tuple(e.user_id, e.item_id, e.value, e.timestamp);
    };
    std::vector<std::tuple<std::int64_t, std::int64_t, double, std::int64_t>> ka, kb;
    for (const auto& e : a) ka.push_back(key(e));
    for (const auto& e : b) kb.push_back(key(e));
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    return ka == kb;
}

std::vector<RawEvent> crossed(int users, int items) {
    std::vector<RawEvent> out;
    for (int u = 1; u <= users; ++u)
        for (int i = 1; i <= items; ++i)
            out.push_back({u, i, 3.0, static_cast<std::int64_t>(u * 100 + i)});
    return out;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("movielens lines parse into events and titles") {
    TempDir dir;
    write_file(dir.file("ratings.dat"),
               "1::1193::5::978300760\n"
               "1::661::3::978302109\n"
               "2::1193::4::978298413\n");
    write_file(dir.file("movies.dat"),
               "1193::One Flew Over the Cuckoo's Nest (1975)::Drama\n"
               "661::James and the Giant Peach (1996)::Animation|Children's|Musical\n");
    const auto res = parse_movielens(dir.file("ratings.dat"), dir.file("movies.dat"));
    REQUIRE(res.events.size() == 3);
    CHECK(res.skipped_lines == 0);
    CHECK(res.events[0].user_id == 1);
    CHECK(res.events[0].item_id == 1193);
    CHECK(res.events[0].value == doctest::Approx(5.0));
    CHECK(res.events[0].timestamp == 978300760);
    CHECK(res.titles.at(1193) == "One Flew Over the Cuckoo's Nest (1975)");
}

TEST_CASE("empty ratings file parses to nothing") {
    TempDir dir;
    write_file(dir.file("ratings.dat"), "");
    write_file(dir.file("movies.dat"), "");
    const auto res = parse_movielens(dir.file("ratings.dat"), dir.file("movies.dat"));
    CHECK(res.events.empty());
    CHECK(res.titles.empty());
    CHECK(res.skipped_lines == 0);
}

TEST_CASE("malformed lines are counted and skipped") {
    TempDir dir;
    write_file(dir.file("ratings.dat"),
               "1::x::5::0\n"
               "2::10::4::100\n"
               "not a line\n"
               "3::11::bad::100\n");
    write_file(dir.file("movies.dat"), "10::A::G\n11::B::G\n");
    const auto res = parse_movielens(dir.file("ratings.dat"), dir.file("movies.dat"));
    REQUIRE(res.events.size() == 1);
    CHECK(res.events[0].user_id == 2);
    CHECK(res.skipped_lines == 3);
}

TEST_CASE("missing ratings file is a hard error") {
    TempDir dir;
    write_file(dir.file("movies.dat"), "");
    CHECK_THROWS_AS(parse_movielens(dir.file("absent.dat"), dir.file("movies.dat")),
                    std::runtime_error);
}

TEST_CASE("latin-1 titles are re-encoded to utf-8") {
    TempDir dir;
    write_file(dir.file("ratings.dat"), "1::5::4::10\n");
    // 0xE9 is e-acute in Latin-1 and invalid as a standalone UTF-8 byte
    write_file(dir.file("movies.dat"), std::string("5::Am\xE9lie (2001)::Romance\n"));
    const auto res = parse_movielens(dir.file("ratings.dat"), dir.file("movies.dat"));
    CHECK(res.titles.at(5) == "Am\xC3\xA9lie (2001)");
}

TEST_CASE("csv needs the documented header") {
    TempDir dir;
    write_file(dir.file("log.csv"),
               "user_id,item_id,value,timestamp\n"
               "4,9,2.5,1000\n"
               "4,10,0.5,1100\n");
    const auto res = parse_csv(dir.file("log.csv"));
    REQUIRE(res.events.size() == 2);
    CHECK(res.events[1].value == doctest::Approx(0.5));
    CHECK(res.titles.empty());

    write_file(dir.file("bad.csv"), "user,item,value,time\n1,2,3,4\n");
    CHECK_THROWS_AS(parse_csv(dir.file("bad.csv")), std::runtime_error);
}

TEST_CASE("complete bipartite graph is already a k-core") {
    const auto events = crossed(3, 3);
    const auto kept = kcore_filter(events, 3);
    CHECK(kept.size() == 9);
    CHECK(same_events(kept, events));
}

TEST_CASE("a dangling user is peeled off") {
    auto events = crossed(3, 3);
    events.push_back({99, 1, 5.0, 1});
    const auto kept = kcore_filter(events, 3);
    CHECK(kept.size() == 9);
    for (const auto& e : kept) CHECK(e.user_id != 99);
    CHECK(same_events(kept, brute_kcore(events, 3)));
}

TEST_CASE("k equal to one keeps everything") {
    const auto events = crossed(2, 5);
    CHECK(same_events(kcore_filter(events, 1), events));
}

TEST_CASE("cascading removals reach the brute-force fixpoint") {
    std::mt19937_64 gen(51);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<RawEvent> events;
        const int n = 30 + static_cast<int>(gen() % 40);
        for (int i = 0; i < n; ++i)
            events.push_back({static_cast<std::int64_t>(1 + gen() % 9),
                              static_cast<std::int64_t>(1 + gen() % 12), 1.0,
                              static_cast<std::int64_t>(i)});
        for (const int k : {2, 3, 4}) {
            const auto fast = kcore_filter(events, k);
            CHECK(same_events(fast, brute_kcore(events, k)));
            // idempotence
            CHECK(same_events(kcore_filter(fast, k), fast));
            // permutation invariance
            auto shuffled = events;
            std::shuffle(shuffled.begin(), shuffled.end(), gen);
            CHECK(same_events(kcore_filter(shuffled, k), fast));
        }
    }
}

TEST_CASE("five distinct engagement levels map onto the full scale") {
    std::vector<RawEvent> events;
    const double hours[] = {10, 20, 30, 40, 50};
    for (int u = 0; u < 5; ++u) events.push_back({u + 1, 7, hours[u], 100});
    const auto scored = implicit_to_score(events, PercentilePool::PerItem);
    for (int u = 0; u < 5; ++u) CHECK(scored[u].value == doctest::Approx(u + 1.0));
}

TEST_CASE("ties share the average-rank bucket") {
    std::vector<RawEvent> events;
    for (int u = 0; u < 5; ++u) events.push_back({u + 1, 7, 12.0, 100});
    const auto scored = implicit_to_score(events, PercentilePool::PerItem);
    // average rank 3 of 5 -> percentile 0.6 -> score 3
    for (const auto& e : scored) CHECK(e.value == doctest::Approx(3.0));
}

TEST_CASE("a single-user pool earns the top score") {
    const auto scored = implicit_to_score({{42, 7, 0.25, 100}}, PercentilePool::PerItem);
    REQUIRE(scored.size() == 1);
    CHECK(scored[0].value == doctest::Approx(5.0));
}

TEST_CASE("per-item conversion agrees with the naive percentile oracle") {
    std::mt19937_64 gen(53);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<RawEvent> events;
        const int users = 2 + static_cast<int>(gen() % 7);
        const int items = 1 + static_cast<int>(gen() % 3);
        for (int u = 1; u <= users; ++u)
            for (int i = 1; i <= items; ++i)
                events.push_back({u, i, static_cast<double>(gen() % 6), 10});
        const auto scored = implicit_to_score(events, PercentilePool::PerItem);
        REQUIRE(scored.size() == events.size());
        for (std::size_t idx = 0; idx < events.size(); ++idx) {
            std::vector<double> pool;
            for (const auto& e : events)
                if (e.item_id == events[idx].item_id) pool.push_back(e.value);
            CHECK(scored[idx].value ==
                  doctest::Approx(oracle_percentile_score(pool, events[idx].value)));
        }
    }
}

TEST_CASE("per-user pooling ranks one user's items against each other") {
    std::vector<RawEvent> events = {{1, 10, 1.0, 0}, {1, 11, 2.0, 1}, {1, 12, 3.0, 2},
                                    {1, 13, 4.0, 3}, {1, 14, 5.0, 4}};
    const auto scored = implicit_to_score(events, PercentilePool::PerUser);
    for (int i = 0; i < 5; ++i) CHECK(scored[i].value == doctest::Approx(i + 1.0));
}

TEST_CASE("conversion never leaves the structured scale and keeps rank order") {
    std::mt19937_64 gen(59);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<RawEvent> events;
        const int n = 1 + static_cast<int>(gen() % 12);
        for (int u = 0; u < n; ++u)
            events.push_back({u + 1, 3, static_cast<double>(gen() % 20) / 2.0, 5});
        const auto scored = implicit_to_score(events, PercentilePool::PerItem);
        for (const auto& e : scored) {
            CHECK(e.value >= 1.0);
            CHECK(e.value <= 5.0);
        }
        for (std::size_t a = 0; a < events.size(); ++a)
            for (std::size_t b = 0; b < events.size(); ++b)
                if (events[a].value > events[b].value)
                    CHECK(scored[a].value >= scored[b].value);
    }
}

TEST_CASE("sequence building orders by timestamp and drops short users") {
    std::vector<RawEvent> events = {
        {1, 10, 4, 300}, {1, 11, 5, 100}, {1, 12, 3, 200},  // out of order on purpose
        {2, 13, 4, 50},                                     // only one event
        {3, 14, 4, 10}, {3, 15, 2, 20},  {3, 16, 4, 30},
    };
    std::map<std::int64_t, std::string> titles;
    SequenceBuildReport report;
    const auto data = build_sequences(events, titles, &report);
    REQUIRE(data.users.size() == 2);
    CHECK(report.dropped_short_users == 1);
    const auto& u1 = data.users[0];
    CHECK(u1.user_id == 1);
    CHECK(u1.interactions[0].item_id == 11);
    CHECK(u1.interactions[1].item_id == 12);
    CHECK(u1.interactions[2].item_id == 10);
    for (int k = 0; k < 3; ++k) CHECK(u1.interactions[k].position == k);
    CHECK(validate_dataset(data.users).empty());
}

TEST_CASE("equal timestamps keep input order") {
    std::vector<RawEvent> events = {{1, 21, 4, 100}, {1, 22, 4, 100}, {1, 23, 4, 100}};
    const auto data = build_sequences(events, {}, nullptr);
    REQUIRE(data.users.size() == 1);
    CHECK(data.users[0].interactions[0].item_id == 21);
    CHECK(data.users[0].interactions[1].item_id == 22);
    CHECK(data.users[0].interactions[2].item_id == 23);
}

}  // TEST_SUITE
