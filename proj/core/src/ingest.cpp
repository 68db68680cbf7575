#include "recpo/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace recpo {

namespace {

bool is_valid_utf8(const std::string& s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t extra;
        if (c < 0x80) extra = 0;
        else if ((c >> 5) == 0x6) extra = 1;
        else if ((c >> 4) == 0xe) extra = 2;
        else if ((c >> 3) == 0x1e) extra = 3;
        else return false;
        for (std::size_t j = 1; j <= extra; ++j) {
            if (i + j >= s.size()) return false;
            if ((static_cast<unsigned char>(s[i + j]) >> 6) != 0x2) return false;
        }
        i += extra + 1;
    }
    return true;
}

std::string latin1_to_utf8(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char ch : s) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back(static_cast<char>(0xc0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3f)));
        }
    }
    return out;
}

std::string ensure_utf8(const std::string& s) {
    return is_valid_utf8(s) ? s : latin1_to_utf8(s);
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> split_on(const std::string& line, const std::string& sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + sep.size();
    }
    return fields;
}

bool parse_i64(const std::string& s, std::int64_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && !s.empty();
}

bool parse_f64(const std::string& s, double& out) {
    if (s.empty()) return false;
    try {
        std::size_t used = 0;
        out = std::stod(s, &used);
        return used == s.size() && std::isfinite(out);
    } catch (const std::exception&) {
        return false;
    }
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return in;
}

}  // namespace

ParseResult parse_movielens(const std::string& ratings_path, const std::string& movies_path) {
    ParseResult result;

    std::ifstream movies = open_or_throw(movies_path);
    std::string line;
    while (std::getline(movies, line)) {
        strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_on(line, "::");
        std::int64_t id;
        if (fields.size() < 2 || !parse_i64(fields[0], id)) {
            ++result.skipped_lines;
            continue;
        }
        result.titles[id] = ensure_utf8(fields[1]);
    }

    std::ifstream ratings = open_or_throw(ratings_path);
    while (std::getline(ratings, line)) {
        strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_on(line, "::");
        RawEvent ev;
        if (fields.size() != 4 || !parse_i64(fields[0], ev.user_id) ||
            !parse_i64(fields[1], ev.item_id) || !parse_f64(fields[2], ev.value) ||
            !parse_i64(fields[3], ev.timestamp)) {
            ++result.skipped_lines;
            continue;
        }
        result.events.push_back(ev);
    }
    return result;
}

ParseResult parse_csv(const std::string& path) {
    ParseResult result;
    std::ifstream in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line)) return result;
    strip_cr(line);
    if (line != "user_id,item_id,value,timestamp")
        throw std::runtime_error("csv header mismatch in " + path +
                                 ": expected 'user_id,item_id,value,timestamp'");
    while (std::getline(in, line)) {
        strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_on(line, ",");
        RawEvent ev;
        if (fields.size() != 4 || !parse_i64(fields[0], ev.user_id) ||
            !parse_i64(fields[1], ev.item_id) || !parse_f64(fields[2], ev.value) ||
            !parse_i64(fields[3], ev.timestamp)) {
            ++result.skipped_lines;
            continue;
        }
        result.events.push_back(ev);
    }
    return result;
}

std::vector<RawEvent> kcore_filter(std::vector<RawEvent> events, int k) {
    if (k < 1) throw std::invalid_argument("kcore_filter: k must be >= 1");
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::int64_t, int> user_count, item_count;
        for (const auto& ev : events) {
            ++user_count[ev.user_id];
            ++item_count[ev.item_id];
        }
        std::vector<RawEvent> kept;
        kept.reserve(events.size());
        for (const auto& ev : events) {
            if (user_count[ev.user_id] >= k && item_count[ev.item_id] >= k)
                kept.push_back(ev);
        }
        if (kept.size() != events.size()) {
            changed = true;
            events = std::move(kept);
        }
    }
    return events;
}

std::vector<RawEvent> implicit_to_score(std::vector<RawEvent> events, PercentilePool pool) {
    // Pool events by the grouping key, average-rank ties, bucket into quintiles.
    std::unordered_map<std::int64_t, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const std::int64_t key =
            pool == PercentilePool::PerItem ? events[i].item_id : events[i].user_id;
        pools[key].push_back(i);
    }
    for (auto& [key, members] : pools) {
        std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            if (events[a].value != events[b].value) return events[a].value < events[b].value;
            return a < b;
        });
        const double n = static_cast<double>(members.size());
        std::size_t i = 0;
        while (i < members.size()) {
            std::size_t j = i;
            while (j + 1 < members.size() &&
                   events[members[j + 1]].value == events[members[i]].value)
                ++j;
            // 1-based ranks i+1..j+1 share the average rank.
            const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
            const double pct = avg_rank / n;
            double score;
            if (pct > 0.8) score = 5.0;
            else if (pct > 0.6) score = 4.0;
            else if (pct > 0.4) score = 3.0;
            else if (pct > 0.2) score = 2.0;
            else score = 1.0;
            for (std::size_t m = i; m <= j; ++m) events[members[m]].value = score;
            i = j + 1;
        }
    }
    return events;
}

Dataset build_sequences(const std::vector<RawEvent>& events,
                        std::map<std::int64_t, std::string> titles,
                        SequenceBuildReport* report) {
    std::map<std::int64_t, std::vector<RawEvent>> by_user;
    for (const auto& ev : events) by_user[ev.user_id].push_back(ev);

    Dataset data;
    data.titles = std::move(titles);
    SequenceBuildReport local;
    for (auto& [uid, evs] : by_user) {
        if (evs.size() < 3) {
            ++local.dropped_short_users;
            continue;
        }
        std::stable_sort(evs.begin(), evs.end(),
                         [](const RawEvent& a, const RawEvent& b) { return a.timestamp < b.timestamp; });
        UserSequence seq;
        seq.user_id = uid;
        seq.interactions.reserve(evs.size());
        for (int pos = 0; pos < static_cast<int>(evs.size()); ++pos) {
            Interaction it;
            it.item_id = evs[pos].item_id;
            it.score = evs[pos].value;
            it.timestamp = evs[pos].timestamp;
            it.position = pos;
            seq.interactions.push_back(it);
        }
        data.users.push_back(std::move(seq));
    }
    if (report) *report = local;
    return data;
}

}  // namespace recpo
