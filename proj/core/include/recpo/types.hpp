#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace recpo {

/// One user-item event on the structured 1-5 preference scale.
struct Interaction {
    std::int64_t item_id = 0;
    double score = 0.0;
    std::int64_t timestamp = 0;
    int position = 0;
};

/// Chronologically ordered interactions of a single user.
struct UserSequence {
    std::int64_t user_id = 0;
    std::vector<Interaction> interactions;

    int length() const { return static_cast<int>(interactions.size()); }
};

enum class Provenance : std::uint8_t { FutureInteraction, SampledNonInteracted };

struct CandidateTag {
    Provenance kind = Provenance::SampledNonInteracted;
    double score = 0.0;    // observed score, FutureInteraction only
    double latency = 0.0;  // observed latency, FutureInteraction only
};

/// The K-item pool one decision point chooses from. `tags` runs parallel to
/// `items`. `low_scored_index` is set only on avoidance/aversion sets and
/// marks the observed low-scored item those metrics look at.
struct CandidateSet {
    std::vector<std::int64_t> items;
    std::vector<CandidateTag> tags;
    int ground_truth_index = -1;
    int low_scored_index = -1;

    int size() const { return static_cast<int>(items.size()); }
};

/// Score/latency evidence attached to one item of a preference group.
struct ItemEvidence {
    std::int64_t item_id = 0;
    double score = 0.0;
    double latency = 0.0;
};

/// One training unit: a preferred item against one or more dispreferred ones.
struct PreferenceGroup {
    std::int64_t user_id = 0;
    int t = 0;
    ItemEvidence preferred;
    std::vector<ItemEvidence> dispreferred;
};

enum class MarginKind : std::uint8_t { Ratio, LogDiff, LogRatio };

// SubtractGap: the preferred item must beat each negative by its margin.
// LiteralEq7: the margin enters the exponent with the opposite sign.
enum class MarginSign : std::uint8_t { SubtractGap, LiteralEq7 };

struct MarginSpec {
    MarginKind kind = MarginKind::Ratio;
    double lambda = 2.0;
    double alpha = 0.5;
    MarginSign sign = MarginSign::SubtractGap;
    double default_score = 3.0;
    double default_latency = 5.0;
};

enum class HistoryMode : std::uint8_t { Filtered, Full };
enum class LatencyMode : std::uint8_t { Rank, Timestamp };

// Grouping for implicit-feedback percentile ranks: a user's engagement with an
// item is ranked against other users of that item (PerItem) or against the
// same user's other items (PerUser).
enum class PercentilePool : std::uint8_t { PerItem, PerUser };

struct PolicyConfig {
    int dim = 32;
    double init_range = 0.1;
    double recency_decay = 0.9;
    double score_gain = 0.5;
};

struct OptimConfig {
    double lr_sft = 1e-2;
    double lr_align = 1e-3;
    int epochs = 30;
    int batch_size = 64;
    double weight_decay = 0.0;
    int patience = 5;
    double divergence_threshold = 1e6;
};

enum class Objective : std::uint8_t { Sft, Dpo, SimPo, SDpo, RecPo };

struct RunConfig {
    double beta = 1.0;
    int negatives_per_group = 3;
    int candidate_size = 20;
    HistoryMode history_mode = HistoryMode::Full;
    bool include_scores = true;
    std::uint64_t seed = 17;
    MarginSpec margin;
    LatencyMode latency_mode = LatencyMode::Rank;
    Objective objective = Objective::RecPo;
    double simpo_margin = 2.0;
    int per_user_cap = 16;
    int kcore = 5;
    int jobs = 1;
    PercentilePool percentile_pool = PercentilePool::PerItem;
    std::vector<int> bucket_edges = {8, 16, 24, 32};
    PolicyConfig policy;
    OptimConfig optim;
};

/// Reason a dataset entry failed validation.
struct Violation {
    std::int64_t user_id = 0;
    int position = -1;
    std::string kind;    // "ordering" | "score_range" | "position" | "too_short"
    std::string detail;
};

/// Report-style invariant check over a whole dataset; empty result means every
/// sequence satisfies ordering, score-range, position and minimum-length rules.
std::vector<Violation> validate_dataset(const std::vector<UserSequence>& sequences);

/// Temporal distance between the interaction at `item_position` and the
/// decision point `cut`, in position-rank units. Requires item_position > cut.
double latency(const UserSequence& seq, int cut, int item_position);

/// Latency under the configured unit. Timestamp mode divides the raw delta by
/// `median_gap` and clamps at 1 so phi's domain is preserved.
double latency(const UserSequence& seq, int cut, int item_position, LatencyMode mode,
               double median_gap);

/// Median of consecutive timestamp deltas across all sequences; 1.0 when no
/// positive delta exists.
double median_inter_event_gap(const std::vector<UserSequence>& sequences);

void check_margin_spec(const MarginSpec& spec);
void check_run_config(const RunConfig& cfg);

const char* to_string(MarginKind k);
const char* to_string(MarginSign s);
const char* to_string(HistoryMode m);
const char* to_string(LatencyMode m);
const char* to_string(Objective o);
const char* to_string(PercentilePool p);

MarginKind margin_kind_from_string(const std::string& s);
MarginSign margin_sign_from_string(const std::string& s);
HistoryMode history_mode_from_string(const std::string& s);
LatencyMode latency_mode_from_string(const std::string& s);
Objective objective_from_string(const std::string& s);
PercentilePool percentile_pool_from_string(const std::string& s);

}  // namespace recpo
