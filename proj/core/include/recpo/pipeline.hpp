#pragma once

#include <optional>
#include <string>
#include <vector>

#include "recpo/dataset.hpp"
#include "recpo/rng.hpp"
#include "recpo/types.hpp"

namespace recpo {

// History visible at cut t (positions 0..t). Filtered mode keeps items scored
// >= 4 and falls back to the single most recent item when that empties the
// view; include_scores=false neutralizes every score to 3 so downstream
// consumers cannot condition on intensity.
std::vector<Interaction> history_view(const UserSequence& seq, int t, HistoryMode mode,
                                      bool include_scores);

std::optional<CandidateSet> build_train_candidates(const UserSequence& seq, int t,
                                                   const ItemVocab& vocab, const RunConfig& cfg,
                                                   double median_gap, Rng& rng);

CandidateSet build_eval_candidates(const UserSequence& seq, int t, const ItemVocab& vocab,
                                   const RunConfig& cfg, double median_gap, Rng& rng);

PreferenceGroup assemble_preference_group(const CandidateSet& candidates, const UserSequence& seq,
                                          int t, const RunConfig& cfg, Rng& rng);

std::optional<CandidateSet> build_adherence_set(const UserSequence& seq, int t,
                                                const ItemVocab& vocab, const RunConfig& cfg,
                                                double median_gap, Rng& rng);

std::optional<CandidateSet> build_avoidance_set(const UserSequence& seq, const ItemVocab& vocab,
                                                const RunConfig& cfg, double median_gap,
                                                Rng& rng);

std::optional<CandidateSet> build_aversion_set(const UserSequence& seq, int t,
                                               const ItemVocab& vocab, const RunConfig& cfg,
                                               double median_gap, Rng& rng);

struct TrainCutRecord {
    std::int64_t user_id = 0;
    int t = 0;
    CandidateSet candidates;
    PreferenceGroup group;
};

struct EvalCutRecord {
    std::int64_t user_id = 0;
    int t = 0;
    CandidateSet candidates;
};

struct SplitDataset {
    std::vector<TrainCutRecord> train;
    std::vector<EvalCutRecord> valid;
    std::vector<EvalCutRecord> test;
    int dropped_valid = 0;        // retention rule: target score < 4 (or target rewatched)
    int dropped_test = 0;
    int skipped_train_cuts = 0;   // cuts with no eligible ground truth
    double median_gap = 1.0;
};

// Leave-last-two split with per-cut candidate sets and preference groups.
// Deterministic for a fixed config; parallel and serial runs agree because
// every cut derives its own rng stream from (seed, user, t).
SplitDataset build_split(const Dataset& data, const ItemVocab& vocab, const RunConfig& cfg);

struct BehavioralSets {
    std::vector<EvalCutRecord> adherence;
    std::vector<EvalCutRecord> avoidance;
    std::vector<EvalCutRecord> aversion;
};

BehavioralSets build_behavioral_sets(const Dataset& data, const ItemVocab& vocab,
                                     const RunConfig& cfg);

// One JSON line per cut: split, user_id, t, items, provenance, indices.
void export_split_manifest(const SplitDataset& split, const std::string& path);
void export_behavioral_manifest(const BehavioralSets& sets, const std::string& path);

void check_candidate_set(const CandidateSet& set, const UserSequence& seq, int t,
                         const RunConfig& cfg);

}  // namespace recpo
