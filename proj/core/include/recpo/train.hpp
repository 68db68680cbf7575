#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "recpo/dataset.hpp"
#include "recpo/pipeline.hpp"
#include "recpo/policy.hpp"
#include "recpo/types.hpp"

namespace recpo {

struct AdamState {
    std::vector<double> m_embeddings, v_embeddings;
    std::vector<double> m_bias, v_bias;
    double m_decay = 0.0, v_decay = 0.0;
    double m_gain = 0.0, v_gain = 0.0;
    long step = 0;

    static AdamState zeros(int vocab_size, int dim);
};

// Adam with bias correction and decoupled weight decay. recency_decay is
// projected back into [1e-3, 1] after the step; the policy contract requires
// eta in (0,1] and unconstrained Adam can cross either edge.
void adam_step(PolicyParams& params, AdamState& state, const PolicyGrad& grad, double lr,
               double weight_decay);

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    double valid_hr1 = 0.0;
    int clamped_margins = 0;
};

struct TrainResult {
    PolicyParams params;                    // best-validation parameters
    std::optional<PolicyParams> reference;  // frozen SFT snapshot, reference-based losses only
    std::vector<EpochRecord> epochs;
    double initial_loss = 0.0;  // mean loss before the first update
    int best_epoch = -1;
    double best_valid_hr1 = 0.0;
};

TrainResult train_sft(const Dataset& data, const ItemVocab& vocab, const SplitDataset& split,
                      const RunConfig& cfg);

TrainResult train_align(const PolicyParams& sft_params, const Dataset& data,
                        const ItemVocab& vocab, const SplitDataset& split, const RunConfig& cfg);

// Max over coordinates of |analytic - central difference| / max(1e-8, |central
// difference|) at the given step size.
double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& x, const std::vector<double>& analytic, double step);

}  // namespace recpo
