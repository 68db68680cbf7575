#include "recpo/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "recpo/config.hpp"

namespace recpo {

namespace {

std::vector<HistoryStep> to_history_steps(const std::vector<Interaction>& view,
                                          const ItemVocab& vocab) {
    std::vector<HistoryStep> steps;
    steps.reserve(view.size());
    for (const Interaction& it : view) {
        const int idx = vocab.index_of(it.item_id);
        if (idx < 0)
            throw std::invalid_argument("policy_scorer: history item " +
                                        std::to_string(it.item_id) + " missing from vocabulary");
        steps.push_back({idx, it.score, it.position});
    }
    return steps;
}

const UserSequence& seq_of(const Dataset& data,
                           const std::unordered_map<std::int64_t, int>& users,
                           std::int64_t user_id) {
    const auto it = users.find(user_id);
    if (it == users.end())
        throw std::invalid_argument("eval: unknown user " + std::to_string(user_id));
    return data.users[it->second];
}

double logp_of(const LogProbTable& table, const ItemVocab& vocab, std::int64_t item) {
    const int idx = vocab.index_of(item);
    if (idx < 0)
        throw std::invalid_argument("eval: candidate item " + std::to_string(item) +
                                    " missing from vocabulary");
    return table.logp[idx];
}

std::int64_t restricted_argmax(const LogProbTable& table, const ItemVocab& vocab,
                               const CandidateSet& set) {
    std::int64_t best_id = 0;
    double best = 0.0;
    bool first = true;
    for (const std::int64_t id : set.items) {
        const double lp = logp_of(table, vocab, id);
        if (first || lp > best || (lp == best && id < best_id)) {
            best = lp;
            best_id = id;
            first = false;
        }
    }
    return best_id;
}

std::int64_t restricted_argmin(const LogProbTable& table, const ItemVocab& vocab,
                               const CandidateSet& set) {
    std::int64_t best_id = 0;
    double best = 0.0;
    bool first = true;
    for (const std::int64_t id : set.items) {
        const double lp = logp_of(table, vocab, id);
        if (first || lp < best || (lp == best && id < best_id)) {
            best = lp;
            best_id = id;
            first = false;
        }
    }
    return best_id;
}

std::int64_t vocab_argmax(const LogProbTable& table, const ItemVocab& vocab) {
    // vocab.ids is ascending, so keeping the first maximum breaks ties toward
    // the smallest item id.
    int best = 0;
    for (int i = 1; i < vocab.size(); ++i)
        if (table.logp[i] > table.logp[best]) best = i;
    return vocab.ids[best];
}

using CaseJudge = std::function<DecisionRecord(const UserSequence&, const EvalCutRecord&,
                                               const LogProbTable&)>;

std::optional<RateResult> run_metric(const Dataset& data, const ItemVocab& vocab,
                                     const std::vector<EvalCutRecord>& cases,
                                     const Scorer& scorer, const CaseJudge& judge,
                                     std::vector<DecisionRecord>* log) {
    if (cases.empty()) return std::nullopt;
    const auto users = user_index(data);
    RateResult out;
    for (const EvalCutRecord& c : cases) {
        const UserSequence& seq = seq_of(data, users, c.user_id);
        const LogProbTable table = scorer(seq, c.t);
        DecisionRecord rec = judge(seq, c, table);
        ++out.evaluated;
        if (rec.success) ++out.successes;
        if (log) log->push_back(std::move(rec));
    }
    out.rate = static_cast<double>(out.successes) / out.evaluated;
    return out;
}

DecisionRecord base_record(const char* metric, const EvalCutRecord& c) {
    DecisionRecord rec;
    rec.metric = metric;
    rec.user_id = c.user_id;
    rec.t = c.t;
    return rec;
}

}  // namespace

Scorer policy_scorer(const PolicyParams& params, const ItemVocab& vocab, const RunConfig& cfg) {
    if (vocab.size() != params.vocab_size)
        throw std::invalid_argument("policy_scorer: vocabulary size disagrees with policy");
    return [params, vocab, cfg](const UserSequence& seq, int t) {
        const auto view = history_view(seq, t, cfg.history_mode, cfg.include_scores);
        return forward_logprobs(params, to_history_steps(view, vocab), t);
    };
}

std::optional<RateResult> hit_ratio_at1(const Dataset& data, const ItemVocab& vocab,
                                        const std::vector<EvalCutRecord>& cases,
                                        const Scorer& scorer, std::vector<DecisionRecord>* log) {
    return run_metric(
        data, vocab, cases, scorer,
        [&](const UserSequence&, const EvalCutRecord& c, const LogProbTable& table) {
            DecisionRecord rec = base_record("hit_ratio_at1", c);
            rec.predicted = restricted_argmax(table, vocab, c.candidates);
            rec.target = c.candidates.items[c.candidates.ground_truth_index];
            rec.success = rec.predicted == rec.target;
            return rec;
        },
        log);
}

std::optional<RateResult> valid_ratio(const Dataset& data, const ItemVocab& vocab,
                                      const std::vector<EvalCutRecord>& cases,
                                      const Scorer& scorer, std::vector<DecisionRecord>* log) {
    return run_metric(
        data, vocab, cases, scorer,
        [&](const UserSequence&, const EvalCutRecord& c, const LogProbTable& table) {
            DecisionRecord rec = base_record("valid_ratio", c);
            rec.predicted = vocab_argmax(table, vocab);
            rec.target = c.candidates.items[c.candidates.ground_truth_index];
            rec.success = false;
            for (const std::int64_t id : c.candidates.items)
                if (id == rec.predicted) rec.success = true;
            return rec;
        },
        log);
}

std::optional<RateResult> adherence_rate(const Dataset& data, const ItemVocab& vocab,
                                         const std::vector<EvalCutRecord>& cases,
                                         const Scorer& scorer, std::vector<DecisionRecord>* log) {
    return run_metric(
        data, vocab, cases, scorer,
        [&](const UserSequence&, const EvalCutRecord& c, const LogProbTable& table) {
            DecisionRecord rec = base_record("adherence_rate", c);
            rec.predicted = restricted_argmax(table, vocab, c.candidates);
            rec.target = c.candidates.items[c.candidates.ground_truth_index];
            rec.success = rec.predicted == rec.target;
            return rec;
        },
        log);
}

std::optional<RateResult> avoidance_rate(const Dataset& data, const ItemVocab& vocab,
                                         const std::vector<EvalCutRecord>& cases,
                                         const Scorer& scorer, std::vector<DecisionRecord>* log) {
    return run_metric(
        data, vocab, cases, scorer,
        [&](const UserSequence&, const EvalCutRecord& c, const LogProbTable& table) {
            DecisionRecord rec = base_record("avoidance_rate", c);
            rec.predicted = restricted_argmax(table, vocab, c.candidates);
            rec.target = c.candidates.items[c.candidates.low_scored_index];
            rec.success = rec.predicted != rec.target;
            return rec;
        },
        log);
}

std::optional<RateResult> aversion_accuracy(const Dataset& data, const ItemVocab& vocab,
                                            const std::vector<EvalCutRecord>& cases,
                                            const Scorer& scorer,
                                            std::vector<DecisionRecord>* log) {
    return run_metric(
        data, vocab, cases, scorer,
        [&](const UserSequence&, const EvalCutRecord& c, const LogProbTable& table) {
            DecisionRecord rec = base_record("aversion_accuracy", c);
            rec.predicted = restricted_argmin(table, vocab, c.candidates);
            rec.target = c.candidates.items[c.candidates.low_scored_index];
            rec.success = rec.predicted == rec.target;
            return rec;
        },
        log);
}

BucketSummary bucket_by_history_len(const Dataset& data, const ItemVocab& vocab,
                                    const std::vector<EvalCutRecord>& cases,
                                    const std::vector<int>& edges, const Scorer& scorer) {
    if (edges.empty()) throw std::invalid_argument("bucket_by_history_len: no edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edges[i - 1] >= edges[i])
            throw std::invalid_argument("bucket_by_history_len: edges must be strictly increasing");

    BucketSummary out;
    out.rows.resize(edges.size() + 1);
    for (std::size_t b = 0; b < edges.size(); ++b)
        out.rows[b].label = b == 0 ? "<=" + std::to_string(edges[0])
                                   : std::to_string(edges[b - 1] + 1) + "-" +
                                         std::to_string(edges[b]);
    out.rows.back().label = ">" + std::to_string(edges.back());

    const auto users = user_index(data);
    for (const EvalCutRecord& c : cases) {
        const UserSequence& seq = seq_of(data, users, c.user_id);
        const int hist_len = c.t + 1;
        std::size_t b = edges.size();
        for (std::size_t i = 0; i < edges.size(); ++i)
            if (hist_len <= edges[i]) {
                b = i;
                break;
            }
        const LogProbTable table = scorer(seq, c.t);
        const std::int64_t pred = restricted_argmax(table, vocab, c.candidates);
        ++out.rows[b].evaluated;
        if (pred == c.candidates.items[c.candidates.ground_truth_index])
            ++out.rows[b].successes;
    }

    std::vector<double> rates;
    for (BucketRow& row : out.rows)
        if (row.evaluated > 0) {
            row.rate = static_cast<double>(row.successes) / row.evaluated;
            rates.push_back(*row.rate);
        }
    if (!rates.empty()) {
        double mean = 0.0;
        for (const double r : rates) mean += r;
        mean /= rates.size();
        double var = 0.0;
        for (const double r : rates) var += (r - mean) * (r - mean);
        var /= rates.size();
        out.cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
    }
    return out;
}

MetricReport build_report(const Dataset& data, const ItemVocab& vocab,
                          const std::vector<EvalCutRecord>& test_cases,
                          const BehavioralSets& behavioral, const RunConfig& cfg,
                          const Scorer& scorer, std::vector<DecisionRecord>* log) {
    MetricReport report;
    report.config = cfg;
    report.hit_ratio_at1 = hit_ratio_at1(data, vocab, test_cases, scorer, log);
    report.valid_ratio = valid_ratio(data, vocab, test_cases, scorer, log);
    report.adherence_rate = adherence_rate(data, vocab, behavioral.adherence, scorer, log);
    report.avoidance_rate = avoidance_rate(data, vocab, behavioral.avoidance, scorer, log);
    report.aversion_accuracy = aversion_accuracy(data, vocab, behavioral.aversion, scorer, log);
    if (!test_cases.empty())
        report.buckets = bucket_by_history_len(data, vocab, test_cases, cfg.bucket_edges, scorer);
    return report;
}

namespace {

std::string fmt_rate(double r) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", r);
    return buf;
}

void emit_json(const MetricReport& report, const std::string& path) {
    nlohmann::ordered_json j;
    j["schema"] = "recpo.report.v1";
    j["aversion_query"] = "argmin_surrogate";
    nlohmann::ordered_json metrics;
    const auto put = [&metrics](const char* name, const std::optional<RateResult>& r) {
        if (!r) return;
        metrics[name] = {{"rate", r->rate}, {"successes", r->successes},
                         {"evaluated", r->evaluated}};
    };
    put("hit_ratio_at1", report.hit_ratio_at1);
    put("valid_ratio", report.valid_ratio);
    put("adherence_rate", report.adherence_rate);
    put("avoidance_rate", report.avoidance_rate);
    put("aversion_accuracy", report.aversion_accuracy);
    j["metrics"] = metrics;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const BucketRow& row : report.buckets.rows) {
        nlohmann::ordered_json r;
        r["label"] = row.label;
        r["evaluated"] = row.evaluated;
        r["successes"] = row.successes;
        if (row.rate) r["rate"] = *row.rate;
        rows.push_back(r);
    }
    nlohmann::ordered_json buckets;
    buckets["rows"] = rows;
    if (report.buckets.cv) buckets["cv"] = *report.buckets.cv;
    j["buckets"] = buckets;
    j["config"] = run_config_to_json(report.config);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("emit_report: cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("emit_report: write failed for " + path);
}

void emit_text(const MetricReport& report, const std::string& path) {
    std::string text;
    char line[128];
    std::snprintf(line, sizeof(line), "%-18s %8s %10s %10s\n", "metric", "rate", "successes",
                  "evaluated");
    text += line;
    const auto put = [&](const char* name, const std::optional<RateResult>& r) {
        if (r)
            std::snprintf(line, sizeof(line), "%-18s %8s %10d %10d\n", name,
                          fmt_rate(r->rate).c_str(), r->successes, r->evaluated);
        else
            std::snprintf(line, sizeof(line), "%-18s %8s %10d %10d\n", name, "-", 0, 0);
        text += line;
    };
    put("hit_ratio_at1", report.hit_ratio_at1);
    put("valid_ratio", report.valid_ratio);
    put("adherence_rate", report.adherence_rate);
    put("avoidance_rate", report.avoidance_rate);
    put("aversion_accuracy", report.aversion_accuracy);

    if (!report.buckets.rows.empty()) {
        text += "\nhistory-length buckets (restricted argmax vs ground truth)\n";
        std::snprintf(line, sizeof(line), "%-10s %8s %10s %10s\n", "bucket", "rate", "successes",
                      "evaluated");
        text += line;
        for (const BucketRow& row : report.buckets.rows) {
            std::snprintf(line, sizeof(line), "%-10s %8s %10d %10d\n", row.label.c_str(),
                          row.rate ? fmt_rate(*row.rate).c_str() : "-", row.successes,
                          row.evaluated);
            text += line;
        }
        if (report.buckets.cv) {
            std::snprintf(line, sizeof(line), "bucket rate cv %s\n", fmt_rate(*report.buckets.cv).c_str());
            text += line;
        }
    }
    text += "\naversion metric is an argmin surrogate over candidate log-probs\n";

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("emit_report: cannot open " + path);
    out << text;
    if (!out) throw std::runtime_error("emit_report: write failed for " + path);
}

}  // namespace

void emit_report(const MetricReport& report, const std::string& path, ReportFormat format) {
    if (format == ReportFormat::Json)
        emit_json(report, path);
    else
        emit_text(report, path);
}

void write_decision_log(const std::vector<DecisionRecord>& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_decision_log: cannot open " + path);
    for (const DecisionRecord& rec : log) {
        nlohmann::ordered_json j;
        j["metric"] = rec.metric;
        j["user_id"] = rec.user_id;
        j["t"] = rec.t;
        j["predicted"] = rec.predicted;
        j["target"] = rec.target;
        j["success"] = rec.success;
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write_decision_log: write failed for " + path);
}

}  // namespace recpo
