#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "recpo/dataset.hpp"
#include "recpo/types.hpp"

namespace recpo {

/// Pre-conversion interaction log entry. `value` is an explicit rating or an
/// implicit engagement proxy such as play-hours.
struct RawEvent {
    std::int64_t user_id = 0;
    std::int64_t item_id = 0;
    double value = 0.0;
    std::int64_t timestamp = 0;
};

struct ParseResult {
    std::vector<RawEvent> events;
    std::map<std::int64_t, std::string> titles;
    std::size_t skipped_lines = 0;
};

/// MovieLens-1M layout: `UserID::MovieID::Rating::Timestamp` plus
/// `MovieID::Title::Genres`. Malformed lines are counted and skipped; titles
/// are re-encoded from Latin-1 when a line is not valid UTF-8.
ParseResult parse_movielens(const std::string& ratings_path, const std::string& movies_path);

/// Generic log with header `user_id,item_id,value,timestamp`.
ParseResult parse_csv(const std::string& path);

/// Maximal subset in which every user and every item keeps >= k events.
std::vector<RawEvent> kcore_filter(std::vector<RawEvent> events, int k);

/// Replaces raw engagement values with 1-5 scores by percentile rank inside
/// the pool (default: a user's engagement ranked against other users of the
/// same item). Ties take the average rank before bucketing.
std::vector<RawEvent> implicit_to_score(std::vector<RawEvent> events,
                                        PercentilePool pool = PercentilePool::PerItem);

struct SequenceBuildReport {
    std::size_t dropped_short_users = 0;
};

/// Groups events per user, orders by timestamp (stable), assigns positions and
/// drops users with fewer than 3 interactions.
Dataset build_sequences(const std::vector<RawEvent>& events,
                        std::map<std::int64_t, std::string> titles,
                        SequenceBuildReport* report = nullptr);

}  // namespace recpo
