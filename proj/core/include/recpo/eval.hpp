#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "recpo/dataset.hpp"
#include "recpo/pipeline.hpp"
#include "recpo/policy.hpp"
#include "recpo/types.hpp"

namespace recpo {

// Scores one decision point: full-vocabulary log-probabilities given the
// history up to t. Tests substitute oracle scorers; production uses
// policy_scorer below.
using Scorer = std::function<LogProbTable(const UserSequence& seq, int t)>;

Scorer policy_scorer(const PolicyParams& params, const ItemVocab& vocab, const RunConfig& cfg);

struct RateResult {
    double rate = 0.0;
    int successes = 0;
    int evaluated = 0;
};

struct DecisionRecord {
    std::string metric;
    std::int64_t user_id = 0;
    int t = 0;
    std::int64_t predicted = 0;
    std::int64_t target = 0;  // ground truth or avoid/aversion item, metric-dependent
    bool success = false;
};

// Candidate-restricted argmax against the ground truth. Ties break toward the
// smallest item id everywhere in this module.
std::optional<RateResult> hit_ratio_at1(const Dataset& data, const ItemVocab& vocab,
                                        const std::vector<EvalCutRecord>& cases,
                                        const Scorer& scorer,
                                        std::vector<DecisionRecord>* log = nullptr);

// Full-vocabulary argmax; success iff the top item lies inside the candidates.
std::optional<RateResult> valid_ratio(const Dataset& data, const ItemVocab& vocab,
                                      const std::vector<EvalCutRecord>& cases,
                                      const Scorer& scorer,
                                      std::vector<DecisionRecord>* log = nullptr);

std::optional<RateResult> adherence_rate(const Dataset& data, const ItemVocab& vocab,
                                         const std::vector<EvalCutRecord>& cases,
                                         const Scorer& scorer,
                                         std::vector<DecisionRecord>* log = nullptr);

std::optional<RateResult> avoidance_rate(const Dataset& data, const ItemVocab& vocab,
                                         const std::vector<EvalCutRecord>& cases,
                                         const Scorer& scorer,
                                         std::vector<DecisionRecord>* log = nullptr);

// Argmin surrogate for "name the least preferred item"; success iff the
// lowest-ranked candidate is the recorded low-scored target.
std::optional<RateResult> aversion_accuracy(const Dataset& data, const ItemVocab& vocab,
                                            const std::vector<EvalCutRecord>& cases,
                                            const Scorer& scorer,
                                            std::vector<DecisionRecord>* log = nullptr);

struct BucketRow {
    std::string label;
    int evaluated = 0;
    int successes = 0;
    std::optional<double> rate;
};

struct BucketSummary {
    std::vector<BucketRow> rows;
    // Coefficient of variation of the non-empty bucket rates.
    std::optional<double> cv;
};

BucketSummary bucket_by_history_len(const Dataset& data, const ItemVocab& vocab,
                                    const std::vector<EvalCutRecord>& cases,
                                    const std::vector<int>& edges, const Scorer& scorer);

struct MetricReport {
    std::optional<RateResult> hit_ratio_at1;
    std::optional<RateResult> valid_ratio;
    std::optional<RateResult> adherence_rate;
    std::optional<RateResult> avoidance_rate;
    std::optional<RateResult> aversion_accuracy;
    BucketSummary buckets;
    RunConfig config;
};

MetricReport build_report(const Dataset& data, const ItemVocab& vocab,
                          const std::vector<EvalCutRecord>& test_cases,
                          const BehavioralSets& behavioral, const RunConfig& cfg,
                          const Scorer& scorer, std::vector<DecisionRecord>* log = nullptr);

enum class ReportFormat { Json, Text };

void emit_report(const MetricReport& report, const std::string& path, ReportFormat format);

void write_decision_log(const std::vector<DecisionRecord>& log, const std::string& path);

}  // namespace recpo
