#include "recpo/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "recpo/eval.hpp"
#include "recpo/objectives.hpp"
#include "recpo/rng.hpp"

namespace recpo {

AdamState AdamState::zeros(int vocab_size, int dim) {
    AdamState st;
    st.m_embeddings.assign(static_cast<std::size_t>(vocab_size) * dim, 0.0);
    st.v_embeddings.assign(static_cast<std::size_t>(vocab_size) * dim, 0.0);
    st.m_bias.assign(vocab_size, 0.0);
    st.v_bias.assign(vocab_size, 0.0);
    return st;
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

void adam_update(double& param, double& m, double& v, double g, double lr, double wd,
                 double bc1, double bc2) {
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    param -= lr * (mhat / (std::sqrt(vhat) + kEps) + wd * param);
}

}  // namespace

void adam_step(PolicyParams& params, AdamState& state, const PolicyGrad& grad, double lr,
               double weight_decay) {
    if (grad.embeddings.size() != params.embeddings.size() ||
        grad.bias.size() != params.bias.size() ||
        state.m_embeddings.size() != params.embeddings.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(kBeta1, state.step);
    const double bc2 = 1.0 - std::pow(kBeta2, state.step);
    for (std::size_t i = 0; i < params.embeddings.size(); ++i)
        adam_update(params.embeddings[i], state.m_embeddings[i], state.v_embeddings[i],
                    grad.embeddings[i], lr, weight_decay, bc1, bc2);
    for (std::size_t i = 0; i < params.bias.size(); ++i)
        adam_update(params.bias[i], state.m_bias[i], state.v_bias[i], grad.bias[i], lr,
                    weight_decay, bc1, bc2);
    adam_update(params.recency_decay, state.m_decay, state.v_decay, grad.recency_decay, lr, 0.0,
                bc1, bc2);
    adam_update(params.score_gain, state.m_gain, state.v_gain, grad.score_gain, lr, 0.0, bc1,
                bc2);
    params.recency_decay = std::clamp(params.recency_decay, 1e-3, 1.0);
}

namespace {

struct Example {
    const UserSequence* seq = nullptr;
    const TrainCutRecord* cut = nullptr;
    std::vector<HistoryStep> history;
    int pref_index = 0;
    std::vector<int> disp_indices;
};

std::vector<Example> prepare_examples(const Dataset& data, const ItemVocab& vocab,
                                      const SplitDataset& split, const RunConfig& cfg) {
    const auto users = user_index(data);
    std::vector<Example> out;
    out.reserve(split.train.size());
    for (const TrainCutRecord& cut : split.train) {
        const auto uit = users.find(cut.user_id);
        if (uit == users.end())
            throw std::invalid_argument("train: split references unknown user " +
                                        std::to_string(cut.user_id));
        Example ex;
        ex.seq = &data.users[uit->second];
        ex.cut = &cut;
        const auto view = history_view(*ex.seq, cut.t, cfg.history_mode, cfg.include_scores);
        ex.history.reserve(view.size());
        for (const Interaction& it : view) {
            const int idx = vocab.index_of(it.item_id);
            if (idx < 0)
                throw std::invalid_argument("train: history item missing from vocabulary");
            ex.history.push_back({idx, it.score, it.position});
        }
        ex.pref_index = vocab.index_of(cut.group.preferred.item_id);
        if (ex.pref_index < 0)
            throw std::invalid_argument("train: preferred item missing from vocabulary");
        for (const ItemEvidence& ev : cut.group.dispreferred) {
            const int idx = vocab.index_of(ev.item_id);
            if (idx < 0)
                throw std::invalid_argument("train: dispreferred item missing from vocabulary");
            ex.disp_indices.push_back(idx);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

// Loss and log-prob weights for one example under the configured objective.
// SFT ignores the reference; DPO and SimPO average their pairwise losses over
// the group's negatives so group scale matches the listwise objectives.
struct ExampleResult {
    double loss = 0.0;
    std::vector<std::pair<int, double>> weights;
    int clamped_margins = 0;
};

ExampleResult example_loss(const Example& ex, const PolicyParams* reference,
                           const RunConfig& cfg, const LogProbTable& theta_table) {
    ExampleResult res;
    if (cfg.objective == Objective::Sft) {
        res.loss = -theta_table.logp[ex.pref_index];
        res.weights.push_back({ex.pref_index, -1.0});
        return res;
    }

    LogProbTable ref_table;
    if (cfg.objective != Objective::SimPo) {
        if (!reference) throw std::invalid_argument("train: alignment objective needs a reference");
        ref_table = forward_logprobs(*reference, ex.history, ex.cut->t);
    }

    const double theta_p = theta_table.logp[ex.pref_index];
    const std::size_t n = ex.disp_indices.size();
    switch (cfg.objective) {
        case Objective::Dpo: {
            const double ref_p = ref_table.logp[ex.pref_index];
            double pref_w = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const int dj = ex.disp_indices[j];
                const auto r = dpo_loss_grad(theta_p, ref_p, theta_table.logp[dj],
                                             ref_table.logp[dj], cfg.beta);
                res.loss += r.loss / n;
                pref_w += r.grad_pref / n;
                res.weights.push_back({dj, r.grad_disp[0] / n});
            }
            res.weights.push_back({ex.pref_index, pref_w});
            return res;
        }
        case Objective::SimPo: {
            double pref_w = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const int dj = ex.disp_indices[j];
                const auto r =
                    simpo_loss_grad(theta_p, theta_table.logp[dj], cfg.beta, cfg.simpo_margin);
                res.loss += r.loss / n;
                pref_w += r.grad_pref / n;
                res.weights.push_back({dj, r.grad_disp[0] / n});
            }
            res.weights.push_back({ex.pref_index, pref_w});
            return res;
        }
        case Objective::SDpo:
        case Objective::RecPo: {
            GroupLogProbs lp;
            lp.theta_p = theta_p;
            lp.ref_p = ref_table.logp[ex.pref_index];
            for (const int dj : ex.disp_indices) {
                lp.theta_d.push_back(theta_table.logp[dj]);
                lp.ref_d.push_back(ref_table.logp[dj]);
            }
            const auto r = cfg.objective == Objective::SDpo
                               ? sdpo_loss_grad(lp, cfg.beta)
                               : recpo_loss_grad(lp, ex.cut->group, cfg.beta, cfg.margin);
            res.loss = r.loss;
            res.clamped_margins = r.clamped_margins;
            res.weights.push_back({ex.pref_index, r.grad_pref});
            for (std::size_t j = 0; j < n; ++j)
                res.weights.push_back({ex.disp_indices[j], r.grad_disp[j]});
            return res;
        }
        default:
            throw std::invalid_argument("train: unsupported objective");
    }
}

struct BatchResult {
    double loss_sum = 0.0;
    int clamped_margins = 0;
};

// Forward + backward over one chunk of the batch, scaled by 1/batch_size.
BatchResult process_chunk(const std::vector<Example>& examples, const std::vector<int>& order,
                          std::size_t begin, std::size_t end, double inv_batch,
                          const PolicyParams& params, const PolicyParams* reference,
                          const RunConfig& cfg, PolicyGrad& grad) {
    BatchResult res;
    for (std::size_t i = begin; i < end; ++i) {
        const Example& ex = examples[order[i]];
        const LogProbTable theta_table = forward_logprobs(params, ex.history, ex.cut->t);
        ExampleResult er = example_loss(ex, reference, cfg, theta_table);
        res.loss_sum += er.loss;
        res.clamped_margins += er.clamped_margins;
        for (auto& [idx, w] : er.weights) w *= inv_batch;
        accumulate_weighted_grad(params, ex.history, ex.cut->t, er.weights, grad);
    }
    return res;
}

void merge_grad(PolicyGrad& into, const PolicyGrad& from) {
    for (std::size_t i = 0; i < into.embeddings.size(); ++i)
        into.embeddings[i] += from.embeddings[i];
    for (std::size_t i = 0; i < into.bias.size(); ++i) into.bias[i] += from.bias[i];
    into.recency_decay += from.recency_decay;
    into.score_gain += from.score_gain;
}

double mean_loss_over(const std::vector<Example>& examples, const PolicyParams& params,
                      const PolicyParams* reference, const RunConfig& cfg) {
    if (examples.empty()) return 0.0;
    double sum = 0.0;
    for (const Example& ex : examples) {
        const LogProbTable table = forward_logprobs(params, ex.history, ex.cut->t);
        sum += example_loss(ex, reference, cfg, table).loss;
    }
    return sum / examples.size();
}

TrainResult run_training(PolicyParams params, std::optional<PolicyParams> reference,
                         const Dataset& data, const ItemVocab& vocab, const SplitDataset& split,
                         const RunConfig& cfg, std::uint64_t shuffle_stage, double lr) {
    if (split.train.empty()) throw std::invalid_argument("train: empty training split");
    const std::vector<Example> examples = prepare_examples(data, vocab, split, cfg);
    const PolicyParams* ref_ptr = reference ? &*reference : nullptr;

    TrainResult result;
    result.initial_loss = mean_loss_over(examples, params, ref_ptr, cfg);

    AdamState adam = AdamState::zeros(params.vocab_size, params.dim);
    const bool has_valid = !split.valid.empty();
    int since_best = 0;

    // The starting point competes for best-validation. An alignment run whose
    // epochs never strictly beat the SFT checkpoint on valid returns that
    // checkpoint unchanged, with best_epoch = -1.
    if (has_valid) {
        const auto hr = hit_ratio_at1(data, vocab, split.valid, policy_scorer(params, vocab, cfg));
        result.best_valid_hr1 = hr->rate;
        result.params = params;
    }

    const int jobs = std::max(1, cfg.jobs);
    std::vector<PolicyGrad> worker_grads;
    for (int w = 0; w < jobs; ++w)
        worker_grads.push_back(PolicyGrad::zeros(params.vocab_size, params.dim));

    for (int epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
        std::vector<int> order(examples.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle = stream_rng(cfg.seed, StreamTag::EpochShuffle, shuffle_stage,
                                 static_cast<std::uint64_t>(epoch));
        shuffle.shuffle(order);

        double epoch_loss = 0.0;
        int epoch_clamps = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.optim.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.optim.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(stop - start);

            BatchResult batch;
            if (jobs == 1) {
                PolicyGrad& g = worker_grads[0];
                std::fill(g.embeddings.begin(), g.embeddings.end(), 0.0);
                std::fill(g.bias.begin(), g.bias.end(), 0.0);
                g.recency_decay = g.score_gain = 0.0;
                batch = process_chunk(examples, order, start, stop, inv_batch, params, ref_ptr,
                                      cfg, g);
            } else {
                // Contiguous chunks merged in worker order keep the reduction
                // deterministic for a fixed job count.
                const std::size_t span = stop - start;
                const std::size_t chunk = (span + jobs - 1) / jobs;
                std::vector<BatchResult> partial(jobs);
                std::vector<std::thread> workers;
                for (int w = 0; w < jobs; ++w) {
                    const std::size_t lo = start + std::min(span, w * chunk);
                    const std::size_t hi = start + std::min(span, (w + 1) * chunk);
                    PolicyGrad& g = worker_grads[w];
                    std::fill(g.embeddings.begin(), g.embeddings.end(), 0.0);
                    std::fill(g.bias.begin(), g.bias.end(), 0.0);
                    g.recency_decay = g.score_gain = 0.0;
                    workers.emplace_back([&, w, lo, hi] {
                        partial[w] = process_chunk(examples, order, lo, hi, inv_batch, params,
                                                   ref_ptr, cfg, worker_grads[w]);
                    });
                }
                for (auto& th : workers) th.join();
                for (int w = 1; w < jobs; ++w) merge_grad(worker_grads[0], worker_grads[w]);
                for (const BatchResult& p : partial) {
                    batch.loss_sum += p.loss_sum;
                    batch.clamped_margins += p.clamped_margins;
                }
            }

            const double batch_loss = batch.loss_sum * inv_batch;
            if (!std::isfinite(batch_loss) || batch_loss > cfg.optim.divergence_threshold)
                throw std::runtime_error(
                    "training diverged at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(start / cfg.optim.batch_size) +
                    ": mean loss = " + std::to_string(batch_loss));

            epoch_loss += batch.loss_sum;
            epoch_clamps += batch.clamped_margins;
            adam_step(params, adam, worker_grads[0], lr, cfg.optim.weight_decay);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = epoch_loss / examples.size();
        rec.clamped_margins = epoch_clamps;
        if (has_valid) {
            const auto hr = hit_ratio_at1(data, vocab, split.valid,
                                          policy_scorer(params, vocab, cfg));
            rec.valid_hr1 = hr->rate;
        }
        result.epochs.push_back(rec);

        if (!has_valid) {
            result.params = params;
            continue;
        }
        if (rec.valid_hr1 > result.best_valid_hr1) {
            result.best_epoch = epoch;
            result.best_valid_hr1 = rec.valid_hr1;
            result.params = params;
            since_best = 0;
        } else if (++since_best >= cfg.optim.patience) {
            break;
        }
    }
    if (result.epochs.empty()) result.params = std::move(params);
    if (!has_valid) result.best_epoch = static_cast<int>(result.epochs.size()) - 1;
    result.reference = std::move(reference);
    return result;
}

}  // namespace

TrainResult train_sft(const Dataset& data, const ItemVocab& vocab, const SplitDataset& split,
                      const RunConfig& cfg) {
    check_run_config(cfg);
    RunConfig sft_cfg = cfg;
    sft_cfg.objective = Objective::Sft;
    PolicyParams params = init_policy(vocab.size(), cfg.policy, cfg.seed);
    return run_training(std::move(params), std::nullopt, data, vocab, split, sft_cfg, 0,
                        cfg.optim.lr_sft);
}

TrainResult train_align(const PolicyParams& sft_params, const Dataset& data,
                        const ItemVocab& vocab, const SplitDataset& split, const RunConfig& cfg) {
    check_run_config(cfg);
    if (cfg.objective == Objective::Sft)
        throw std::invalid_argument("train_align: objective must be a preference loss");
    check_policy(sft_params);
    if (sft_params.vocab_size != vocab.size())
        throw std::invalid_argument("train_align: checkpoint vocabulary disagrees with dataset");
    std::optional<PolicyParams> reference;
    if (cfg.objective != Objective::SimPo) reference = snapshot_reference(sft_params);
    return run_training(sft_params, std::move(reference), data, vocab, split, cfg, 1,
                        cfg.optim.lr_align);
}

double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& x, const std::vector<double>& analytic,
                  double step) {
    if (x.size() != analytic.size())
        throw std::invalid_argument("grad_check: gradient size mismatch");
    double worst = 0.0;
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const double up = f(probe);
        probe[i] = x[i] - step;
        const double down = f(probe);
        probe[i] = x[i];
        const double numeric = (up - down) / (2.0 * step);
        const double rel = std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace recpo
