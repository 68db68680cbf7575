#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "recpo/dataset.hpp"
#include "recpo/types.hpp"

namespace recpo {

// Toy categorical policy over the item vocabulary. The context vector is a
// recency- and score-weighted sum of history embeddings, L2-normalized; logits
// are dot products against item embeddings plus a bias.
struct PolicyParams {
    int vocab_size = 0;
    int dim = 0;
    std::vector<double> embeddings;  // vocab_size x dim, row-major
    std::vector<double> bias;        // vocab_size
    double recency_decay = 0.9;      // eta in (0,1]
    double score_gain = 0.5;         // weight on (score - 3) in the context sum
};

PolicyParams init_policy(int vocab_size, const PolicyConfig& cfg, std::uint64_t seed);
void check_policy(const PolicyParams& params);

// One consumed item as the policy sees it: vocab index, (possibly neutralized)
// score, and the absolute position that drives the recency exponent.
struct HistoryStep {
    int item_index = 0;
    double score = 3.0;
    int position = 0;
};

struct LogProbTable {
    std::vector<double> logp;
};

LogProbTable forward_logprobs(const PolicyParams& params, const std::vector<HistoryStep>& history,
                              int cut);

struct PolicyGrad {
    std::vector<double> embeddings;
    std::vector<double> bias;
    double recency_decay = 0.0;
    double score_gain = 0.0;

    static PolicyGrad zeros(int vocab_size, int dim);
};

// Accumulates d(sum_i w_i * logp_i)/d(params) into grad for one context and
// returns the forward table it computed. weights are (vocab index, w_i) pairs;
// this is the single backward used by both SFT and the alignment objectives.
LogProbTable accumulate_weighted_grad(const PolicyParams& params,
                                      const std::vector<HistoryStep>& history, int cut,
                                      const std::vector<std::pair<int, double>>& weights,
                                      PolicyGrad& grad);

struct SftResult {
    double loss = 0.0;
    PolicyGrad grad;
};

SftResult sft_loss_grad(const PolicyParams& params, const std::vector<HistoryStep>& history,
                        int cut, int target_index);

PolicyParams snapshot_reference(const PolicyParams& params);

// Binary checkpoint; round-trips bit-exactly. The vocab rides along so a saved
// policy can score datasets without re-deriving the id <-> row mapping.
void save_policy(const std::string& path, const PolicyParams& params, const ItemVocab& vocab);
std::pair<PolicyParams, ItemVocab> load_policy(const std::string& path);

}  // namespace recpo
