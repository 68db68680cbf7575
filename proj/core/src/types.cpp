#include "recpo/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace recpo {

std::vector<Violation> validate_dataset(const std::vector<UserSequence>& sequences) {
    std::vector<Violation> out;
    for (const auto& seq : sequences) {
        const int n = seq.length();
        if (n < 3) {
            out.push_back({seq.user_id, -1, "too_short",
                           "sequence has " + std::to_string(n) + " interactions, need >= 3"});
        }
        for (int k = 0; k < n; ++k) {
            const Interaction& it = seq.interactions[k];
            if (it.position != k) {
                std::ostringstream msg;
                msg << "position " << it.position << " at index " << k;
                out.push_back({seq.user_id, k, "position", msg.str()});
            }
            if (!(it.score >= 1.0 && it.score <= 5.0) || !std::isfinite(it.score)) {
                std::ostringstream msg;
                msg << "score " << it.score << " outside [1,5]";
                out.push_back({seq.user_id, k, "score_range", msg.str()});
            }
            if (k > 0 && it.timestamp < seq.interactions[k - 1].timestamp) {
                std::ostringstream msg;
                msg << "timestamp " << it.timestamp << " at position " << k
                    << " precedes timestamp " << seq.interactions[k - 1].timestamp
                    << " at position " << (k - 1);
                out.push_back({seq.user_id, k, "ordering", msg.str()});
            }
        }
    }
    return out;
}

double latency(const UserSequence& seq, int cut, int item_position) {
    if (item_position <= cut) {
        throw std::invalid_argument("latency: item position " + std::to_string(item_position) +
                                    " must lie strictly after cut " + std::to_string(cut));
    }
    if (cut < 0 || item_position >= seq.length()) {
        throw std::invalid_argument("latency: cut/item position out of range");
    }
    return static_cast<double>(item_position - cut);
}

double latency(const UserSequence& seq, int cut, int item_position, LatencyMode mode,
               double median_gap) {
    const double rank = latency(seq, cut, item_position);
    if (mode == LatencyMode::Rank) return rank;
    const double gap = median_gap > 0.0 ? median_gap : 1.0;
    const double delta = static_cast<double>(seq.interactions[item_position].timestamp -
                                             seq.interactions[cut].timestamp);
    return std::max(1.0, delta / gap);
}

double median_inter_event_gap(const std::vector<UserSequence>& sequences) {
    std::vector<double> gaps;
    for (const auto& seq : sequences) {
        for (int k = 1; k < seq.length(); ++k) {
            const double d = static_cast<double>(seq.interactions[k].timestamp -
                                                 seq.interactions[k - 1].timestamp);
            if (d > 0.0) gaps.push_back(d);
        }
    }
    if (gaps.empty()) return 1.0;
    const std::size_t mid = gaps.size() / 2;
    std::nth_element(gaps.begin(), gaps.begin() + mid, gaps.end());
    const double upper = gaps[mid];
    if (gaps.size() % 2 == 1) return upper;
    const double lower = *std::max_element(gaps.begin(), gaps.begin() + mid);
    return (lower + upper) / 2.0;
}

void check_margin_spec(const MarginSpec& spec) {
    if (!(spec.lambda >= 0.0)) throw std::invalid_argument("margin: lambda must be >= 0");
    if (!(spec.alpha > 0.0)) throw std::invalid_argument("margin: alpha must be > 0");
    if (!(spec.default_score >= 1.0 && spec.default_score <= 5.0))
        throw std::invalid_argument("margin: default_score must lie in [1,5]");
    if (!(spec.default_latency >= 1.0))
        throw std::invalid_argument("margin: default_latency must be >= 1");
}

void check_run_config(const RunConfig& cfg) {
    if (!(cfg.beta > 0.0)) throw std::invalid_argument("config: beta must be > 0");
    if (cfg.negatives_per_group < 1)
        throw std::invalid_argument("config: negatives_per_group must be >= 1");
    if (cfg.negatives_per_group >= cfg.candidate_size)
        throw std::invalid_argument("config: negatives_per_group must be < candidate_size");
    if (cfg.candidate_size < 2) throw std::invalid_argument("config: candidate_size must be >= 2");
    if (cfg.policy.dim < 2) throw std::invalid_argument("config: policy dim must be >= 2");
    if (!(cfg.policy.recency_decay > 0.0 && cfg.policy.recency_decay <= 1.0))
        throw std::invalid_argument("config: recency_decay must lie in (0,1]");
    if (cfg.per_user_cap < 1) throw std::invalid_argument("config: per_user_cap must be >= 1");
    if (cfg.kcore < 1) throw std::invalid_argument("config: kcore must be >= 1");
    if (cfg.jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
    if (cfg.optim.batch_size < 1)
        throw std::invalid_argument("config: batch_size must be >= 1");
    if (cfg.optim.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (cfg.optim.patience < 1) throw std::invalid_argument("config: patience must be >= 1");
    if (!(cfg.optim.lr_sft >= 0.0) || !(cfg.optim.lr_align >= 0.0))
        throw std::invalid_argument("config: learning rates must be >= 0");
    if (!(cfg.optim.divergence_threshold > 0.0))
        throw std::invalid_argument("config: divergence_threshold must be > 0");
    check_margin_spec(cfg.margin);
}

const char* to_string(MarginKind k) {
    switch (k) {
        case MarginKind::Ratio: return "ratio";
        case MarginKind::LogDiff: return "log_diff";
        case MarginKind::LogRatio: return "log_ratio";
    }
    return "?";
}

const char* to_string(MarginSign s) {
    return s == MarginSign::SubtractGap ? "subtract_gap" : "literal_eq7";
}

const char* to_string(HistoryMode m) {
    return m == HistoryMode::Filtered ? "filtered" : "full";
}

const char* to_string(LatencyMode m) {
    return m == LatencyMode::Rank ? "rank" : "timestamp";
}

const char* to_string(Objective o) {
    switch (o) {
        case Objective::Sft: return "sft";
        case Objective::Dpo: return "dpo";
        case Objective::SimPo: return "simpo";
        case Objective::SDpo: return "sdpo";
        case Objective::RecPo: return "recpo";
    }
    return "?";
}

const char* to_string(PercentilePool p) {
    return p == PercentilePool::PerItem ? "per_item" : "per_user";
}

namespace {
[[noreturn]] void bad_enum(const char* what, const std::string& s) {
    throw std::invalid_argument(std::string("unknown ") + what + ": '" + s + "'");
}
}  // namespace

MarginKind margin_kind_from_string(const std::string& s) {
    if (s == "ratio") return MarginKind::Ratio;
    if (s == "log_diff") return MarginKind::LogDiff;
    if (s == "log_ratio") return MarginKind::LogRatio;
    bad_enum("margin kind", s);
}

MarginSign margin_sign_from_string(const std::string& s) {
    if (s == "subtract_gap") return MarginSign::SubtractGap;
    if (s == "literal_eq7") return MarginSign::LiteralEq7;
    bad_enum("margin sign", s);
}

HistoryMode history_mode_from_string(const std::string& s) {
    if (s == "filtered") return HistoryMode::Filtered;
    if (s == "full") return HistoryMode::Full;
    bad_enum("history mode", s);
}

LatencyMode latency_mode_from_string(const std::string& s) {
    if (s == "rank") return LatencyMode::Rank;
    if (s == "timestamp") return LatencyMode::Timestamp;
    bad_enum("latency mode", s);
}

Objective objective_from_string(const std::string& s) {
    if (s == "sft") return Objective::Sft;
    if (s == "dpo") return Objective::Dpo;
    if (s == "simpo") return Objective::SimPo;
    if (s == "sdpo") return Objective::SDpo;
    if (s == "recpo") return Objective::RecPo;
    bad_enum("objective", s);
}

PercentilePool percentile_pool_from_string(const std::string& s) {
    if (s == "per_item") return PercentilePool::PerItem;
    if (s == "per_user") return PercentilePool::PerUser;
    bad_enum("percentile pool", s);
}

}  // namespace recpo
