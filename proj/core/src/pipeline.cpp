#include "recpo/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "json.hpp"

namespace recpo {

namespace {

std::unordered_set<std::int64_t> prefix_items(const UserSequence& seq, int t) {
    std::unordered_set<std::int64_t> out;
    for (int k = 0; k <= t; ++k) out.insert(seq.interactions[k].item_id);
    return out;
}

std::unordered_set<std::int64_t> all_items(const UserSequence& seq) {
    std::unordered_set<std::int64_t> out;
    for (const auto& it : seq.interactions) out.insert(it.item_id);
    return out;
}

// Future interactions visible from cut t: chronological, deduplicated by item
// (first occurrence wins), excluding anything already in the history prefix.
struct FutureItem {
    std::int64_t item_id;
    double score;
    double lat;
    int position;
};

std::vector<FutureItem> future_items(const UserSequence& seq, int t, const RunConfig& cfg,
                                     double median_gap) {
    const auto prefix = prefix_items(seq, t);
    std::unordered_set<std::int64_t> seen;
    std::vector<FutureItem> out;
    for (int k = t + 1; k < seq.length(); ++k) {
        const Interaction& it = seq.interactions[k];
        if (prefix.count(it.item_id) || seen.count(it.item_id)) continue;
        seen.insert(it.item_id);
        out.push_back({it.item_id, it.score,
                       latency(seq, t, k, cfg.latency_mode, median_gap), k});
    }
    return out;
}

// Uniform draws from the never-interacted complement, resampling collisions.
void sample_non_interacted(const ItemVocab& vocab,
                           const std::unordered_set<std::int64_t>& interacted,
                           std::unordered_set<std::int64_t>& chosen, int count,
                           CandidateSet& set, Rng& rng) {
    const std::size_t v = vocab.ids.size();
    std::size_t unavailable = interacted.size();
    for (const auto id : chosen)
        if (!interacted.count(id)) ++unavailable;
    if (v < unavailable + static_cast<std::size_t>(count))
        throw std::runtime_error(
            "candidate sampling: vocabulary too small for the requested set size");
    for (int i = 0; i < count; ++i) {
        std::int64_t id;
        do {
            id = vocab.ids[rng.below(v)];
        } while (interacted.count(id) || chosen.count(id));
        chosen.insert(id);
        set.items.push_back(id);
        set.tags.push_back({Provenance::SampledNonInteracted, 0.0, 0.0});
    }
}

void push_future(CandidateSet& set, std::unordered_set<std::int64_t>& chosen,
                 const FutureItem& f) {
    chosen.insert(f.item_id);
    set.items.push_back(f.item_id);
    set.tags.push_back({Provenance::FutureInteraction, f.score, f.lat});
}

}  // namespace

std::vector<Interaction> history_view(const UserSequence& seq, int t, HistoryMode mode,
                                      bool include_scores) {
    if (t < 0 || t >= seq.length())
        throw std::invalid_argument("history_view: cut outside sequence");
    std::vector<Interaction> out;
    for (int k = 0; k <= t; ++k) {
        const Interaction& it = seq.interactions[k];
        if (mode == HistoryMode::Filtered && it.score < 4.0) continue;
        out.push_back(it);
    }
    if (out.empty()) out.push_back(seq.interactions[t]);
    if (!include_scores)
        for (Interaction& it : out) it.score = 3.0;
    return out;
}

std::optional<CandidateSet> build_train_candidates(const UserSequence& seq, int t,
                                                   const ItemVocab& vocab, const RunConfig& cfg,
                                                   double median_gap, Rng& rng) {
    const auto futures = future_items(seq, t, cfg, median_gap);
    int gt = -1;
    for (std::size_t i = 0; i < futures.size(); ++i)
        if (futures[i].score >= 4.0) {
            gt = static_cast<int>(i);
            break;
        }
    if (gt < 0) return std::nullopt;

    CandidateSet set;
    std::unordered_set<std::int64_t> chosen;
    push_future(set, chosen, futures[gt]);
    const int future_slots = std::min(cfg.candidate_size / 2, static_cast<int>(futures.size()));
    for (std::size_t i = 0; i < futures.size() && set.size() < future_slots; ++i)
        if (static_cast<int>(i) != gt) push_future(set, chosen, futures[i]);
    set.ground_truth_index = 0;

    sample_non_interacted(vocab, all_items(seq), chosen, cfg.candidate_size - set.size(), set,
                          rng);
    return set;
}

CandidateSet build_eval_candidates(const UserSequence& seq, int t, const ItemVocab& vocab,
                                   const RunConfig& cfg, double median_gap, Rng& rng) {
    if (t + 1 >= seq.length())
        throw std::invalid_argument("build_eval_candidates: no interaction after cut");
    const Interaction& target = seq.interactions[t + 1];
    if (target.score < 4.0)
        throw std::invalid_argument("build_eval_candidates: target is not highly rated");

    CandidateSet set;
    std::unordered_set<std::int64_t> chosen{target.item_id};
    set.items.push_back(target.item_id);
    set.tags.push_back({Provenance::FutureInteraction, target.score,
                        latency(seq, t, t + 1, cfg.latency_mode, median_gap)});
    set.ground_truth_index = 0;
    sample_non_interacted(vocab, all_items(seq), chosen, cfg.candidate_size - 1, set, rng);
    return set;
}

PreferenceGroup assemble_preference_group(const CandidateSet& candidates, const UserSequence& seq,
                                          int t, const RunConfig& cfg, Rng& rng) {
    if (candidates.ground_truth_index < 0 ||
        candidates.ground_truth_index >= candidates.size())
        throw std::invalid_argument("assemble_preference_group: candidate set has no ground truth");
    if (cfg.negatives_per_group >= candidates.size())
        throw std::invalid_argument(
            "assemble_preference_group: negatives_per_group must be smaller than the candidate set");

    const CandidateTag& gt_tag = candidates.tags[candidates.ground_truth_index];
    PreferenceGroup group;
    group.user_id = seq.user_id;
    group.t = t;
    group.preferred = {candidates.items[candidates.ground_truth_index], gt_tag.score,
                       gt_tag.latency};

    std::vector<int> others;
    others.reserve(candidates.size() - 1);
    for (int i = 0; i < candidates.size(); ++i)
        if (i != candidates.ground_truth_index) others.push_back(i);
    const auto picked = rng.sample_without_replacement(
        others, static_cast<std::size_t>(cfg.negatives_per_group));
    for (const int idx : picked) {
        const CandidateTag& tag = candidates.tags[idx];
        ItemEvidence ev;
        ev.item_id = candidates.items[idx];
        if (tag.kind == Provenance::FutureInteraction) {
            ev.score = tag.score;
            ev.latency = tag.latency;
        } else {
            ev.score = cfg.margin.default_score;
            ev.latency = cfg.margin.default_latency;
        }
        group.dispreferred.push_back(ev);
    }
    return group;
}

std::optional<CandidateSet> build_adherence_set(const UserSequence& seq, int t,
                                                const ItemVocab& vocab, const RunConfig& cfg,
                                                double median_gap, Rng& rng) {
    const auto futures = future_items(seq, t, cfg, median_gap);
    std::vector<FutureItem> high;
    for (const auto& f : futures)
        if (f.score >= 4.0) high.push_back(f);
    if (high.size() < 2) return std::nullopt;

    CandidateSet set;
    std::unordered_set<std::int64_t> chosen;
    push_future(set, chosen, high[0]);  // smallest latency = earliest future position
    set.ground_truth_index = 0;
    const int distractor_cap = cfg.candidate_size / 2 - 1;
    for (std::size_t i = 1; i < high.size() && static_cast<int>(i) <= distractor_cap; ++i)
        push_future(set, chosen, high[i]);
    sample_non_interacted(vocab, all_items(seq), chosen, cfg.candidate_size - set.size(), set,
                          rng);
    return set;
}

std::optional<CandidateSet> build_avoidance_set(const UserSequence& seq, const ItemVocab& vocab,
                                                const RunConfig& cfg, double median_gap,
                                                Rng& rng) {
    const Interaction& last = seq.interactions.back();
    if (last.score > 2.0) return std::nullopt;
    for (int k = 0; k + 1 < seq.length(); ++k)
        if (seq.interactions[k].item_id == last.item_id) return std::nullopt;

    CandidateSet set;
    std::unordered_set<std::int64_t> chosen{last.item_id};
    set.items.push_back(last.item_id);
    set.tags.push_back({Provenance::FutureInteraction, last.score,
                        latency(seq, seq.length() - 2, seq.length() - 1, cfg.latency_mode,
                                median_gap)});
    set.low_scored_index = 0;
    sample_non_interacted(vocab, all_items(seq), chosen, cfg.candidate_size - 1, set, rng);
    return set;
}

std::optional<CandidateSet> build_aversion_set(const UserSequence& seq, int t,
                                               const ItemVocab& vocab, const RunConfig& cfg,
                                               double median_gap, Rng& rng) {
    const auto futures = future_items(seq, t, cfg, median_gap);
    int low = -1, gt = -1;
    for (std::size_t i = 0; i < futures.size(); ++i) {
        if (low < 0 && futures[i].score <= 2.0) low = static_cast<int>(i);
        if (gt < 0 && futures[i].score >= 4.0) gt = static_cast<int>(i);
    }
    if (low < 0 || gt < 0) return std::nullopt;

    CandidateSet set;
    std::unordered_set<std::int64_t> chosen;
    push_future(set, chosen, futures[gt]);
    set.ground_truth_index = 0;
    push_future(set, chosen, futures[low]);
    set.low_scored_index = 1;
    sample_non_interacted(vocab, all_items(seq), chosen, cfg.candidate_size - set.size(), set,
                          rng);
    return set;
}

namespace {

struct UserSplitPart {
    std::vector<TrainCutRecord> train;
    std::vector<EvalCutRecord> valid;
    std::vector<EvalCutRecord> test;
    int dropped_valid = 0;
    int dropped_test = 0;
    int skipped_train_cuts = 0;
};

UserSplitPart split_one_user(const UserSequence& seq, const ItemVocab& vocab,
                             const RunConfig& cfg, double median_gap) {
    UserSplitPart part;
    const int n = seq.length();
    const std::uint64_t uid = static_cast<std::uint64_t>(seq.user_id);

    std::vector<int> cuts;
    for (int t = 0; t + 2 < n; ++t) cuts.push_back(t);
    if (static_cast<int>(cuts.size()) > cfg.per_user_cap) {
        Rng sub = stream_rng(cfg.seed, StreamTag::CutSubsample, uid, 0);
        cuts = sub.sample_without_replacement(cuts, static_cast<std::size_t>(cfg.per_user_cap));
        std::sort(cuts.begin(), cuts.end());
    }
    for (const int t : cuts) {
        Rng rng = stream_rng(cfg.seed, StreamTag::TrainCandidates, uid,
                             static_cast<std::uint64_t>(t));
        auto set = build_train_candidates(seq, t, vocab, cfg, median_gap, rng);
        if (!set) {
            ++part.skipped_train_cuts;
            continue;
        }
        Rng grng = stream_rng(cfg.seed, StreamTag::Group, uid, static_cast<std::uint64_t>(t));
        TrainCutRecord rec;
        rec.user_id = seq.user_id;
        rec.t = t;
        rec.group = assemble_preference_group(*set, seq, t, cfg, grng);
        rec.candidates = std::move(*set);
        part.train.push_back(std::move(rec));
    }

    // Valid targets the second-to-last interaction, test the last. A target
    // rewatched from inside its own history would breach candidate/history
    // disjointness, so those sequences are dropped alongside low-scored ones.
    const auto eval_cut = [&](int t, std::vector<EvalCutRecord>& out, int& dropped) {
        const Interaction& target = seq.interactions[t + 1];
        bool rewatch = false;
        for (int k = 0; k <= t; ++k)
            if (seq.interactions[k].item_id == target.item_id) rewatch = true;
        if (target.score < 4.0 || rewatch) {
            ++dropped;
            return;
        }
        Rng rng = stream_rng(cfg.seed, StreamTag::EvalCandidates, uid,
                             static_cast<std::uint64_t>(t));
        EvalCutRecord rec;
        rec.user_id = seq.user_id;
        rec.t = t;
        rec.candidates = build_eval_candidates(seq, t, vocab, cfg, median_gap, rng);
        out.push_back(std::move(rec));
    };
    eval_cut(n - 3, part.valid, part.dropped_valid);
    eval_cut(n - 2, part.test, part.dropped_test);
    return part;
}

}  // namespace

SplitDataset build_split(const Dataset& data, const ItemVocab& vocab, const RunConfig& cfg) {
    check_run_config(cfg);
    for (const auto& seq : data.users)
        if (seq.length() < 3)
            throw std::invalid_argument("build_split: sequence shorter than 3 (user " +
                                        std::to_string(seq.user_id) + ")");

    SplitDataset split;
    split.median_gap = median_inter_event_gap(data.users);

    const std::size_t n = data.users.size();
    std::vector<UserSplitPart> parts(n);
    const int jobs = std::max(1, std::min(cfg.jobs, static_cast<int>(n)));
    if (jobs == 1) {
        for (std::size_t u = 0; u < n; ++u)
            parts[u] = split_one_user(data.users[u], vocab, cfg, split.median_gap);
    } else {
        std::vector<std::thread> workers;
        std::atomic<std::size_t> next{0};
        for (int w = 0; w < jobs; ++w)
            workers.emplace_back([&] {
                for (std::size_t u = next.fetch_add(1); u < n; u = next.fetch_add(1))
                    parts[u] = split_one_user(data.users[u], vocab, cfg, split.median_gap);
            });
        for (auto& th : workers) th.join();
    }

    for (auto& part : parts) {
        std::move(part.train.begin(), part.train.end(), std::back_inserter(split.train));
        std::move(part.valid.begin(), part.valid.end(), std::back_inserter(split.valid));
        std::move(part.test.begin(), part.test.end(), std::back_inserter(split.test));
        split.dropped_valid += part.dropped_valid;
        split.dropped_test += part.dropped_test;
        split.skipped_train_cuts += part.skipped_train_cuts;
    }
    return split;
}

BehavioralSets build_behavioral_sets(const Dataset& data, const ItemVocab& vocab,
                                     const RunConfig& cfg) {
    check_run_config(cfg);
    BehavioralSets out;
    const double median_gap = median_inter_event_gap(data.users);
    for (const auto& seq : data.users) {
        const std::uint64_t uid = static_cast<std::uint64_t>(seq.user_id);

        // Latest cut qualifying keeps the history as long as possible.
        for (int t = seq.length() - 2; t >= 0; --t) {
            Rng rng = stream_rng(cfg.seed, StreamTag::Adherence, uid,
                                 static_cast<std::uint64_t>(t));
            if (auto set = build_adherence_set(seq, t, vocab, cfg, median_gap, rng)) {
                out.adherence.push_back({seq.user_id, t, std::move(*set)});
                break;
            }
        }
        {
            Rng rng = stream_rng(cfg.seed, StreamTag::Avoidance, uid, 0);
            if (auto set = build_avoidance_set(seq, vocab, cfg, median_gap, rng))
                out.avoidance.push_back({seq.user_id, seq.length() - 2, std::move(*set)});
        }
        for (int t = seq.length() - 2; t >= 0; --t) {
            Rng rng = stream_rng(cfg.seed, StreamTag::Aversion, uid,
                                 static_cast<std::uint64_t>(t));
            if (auto set = build_aversion_set(seq, t, vocab, cfg, median_gap, rng)) {
                out.aversion.push_back({seq.user_id, t, std::move(*set)});
                break;
            }
        }
    }
    return out;
}

namespace {

void emit_cut_line(std::ofstream& out, const char* name, std::int64_t user_id, int t,
                   const CandidateSet& set) {
    nlohmann::ordered_json rec;
    rec["split"] = name;
    rec["user_id"] = user_id;
    rec["t"] = t;
    rec["items"] = set.items;
    std::vector<std::string> prov;
    prov.reserve(set.tags.size());
    for (const auto& tag : set.tags)
        prov.push_back(tag.kind == Provenance::FutureInteraction ? "future" : "sampled");
    rec["provenance"] = prov;
    rec["ground_truth_index"] = set.ground_truth_index;
    if (set.low_scored_index >= 0) rec["low_scored_index"] = set.low_scored_index;
    out << rec.dump() << '\n';
}

}  // namespace

void export_split_manifest(const SplitDataset& split, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("export_split_manifest: cannot open " + path);
    for (const auto& r : split.train) emit_cut_line(out, "train", r.user_id, r.t, r.candidates);
    for (const auto& r : split.valid) emit_cut_line(out, "valid", r.user_id, r.t, r.candidates);
    for (const auto& r : split.test) emit_cut_line(out, "test", r.user_id, r.t, r.candidates);
    if (!out) throw std::runtime_error("export_split_manifest: write failed for " + path);
}

void export_behavioral_manifest(const BehavioralSets& sets, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("export_behavioral_manifest: cannot open " + path);
    for (const auto& r : sets.adherence)
        emit_cut_line(out, "adherence", r.user_id, r.t, r.candidates);
    for (const auto& r : sets.avoidance)
        emit_cut_line(out, "avoidance", r.user_id, r.t, r.candidates);
    for (const auto& r : sets.aversion)
        emit_cut_line(out, "aversion", r.user_id, r.t, r.candidates);
    if (!out) throw std::runtime_error("export_behavioral_manifest: write failed for " + path);
}

void check_candidate_set(const CandidateSet& set, const UserSequence& seq, int t,
                         const RunConfig& cfg) {
    if (set.size() != cfg.candidate_size)
        throw std::invalid_argument("candidate set: wrong size");
    if (set.tags.size() != set.items.size())
        throw std::invalid_argument("candidate set: tags misaligned");
    std::unordered_set<std::int64_t> seen;
    for (const auto id : set.items)
        if (!seen.insert(id).second)
            throw std::invalid_argument("candidate set: duplicate item");
    const auto prefix = prefix_items(seq, t);
    for (const auto id : set.items)
        if (prefix.count(id))
            throw std::invalid_argument("candidate set: item overlaps history prefix");
    if (set.ground_truth_index >= 0) {
        if (set.ground_truth_index >= set.size())
            throw std::invalid_argument("candidate set: ground truth index out of range");
        if (set.tags[set.ground_truth_index].kind != Provenance::FutureInteraction)
            throw std::invalid_argument("candidate set: ground truth is not a future interaction");
    }
}

}  // namespace recpo
