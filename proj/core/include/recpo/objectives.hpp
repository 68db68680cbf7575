#pragma once

#include <vector>

#include "recpo/types.hpp"

namespace recpo {

// Numerically stable scalar helpers shared across losses and tests.
double sigmoid(double x);
double softplus(double x);
double log_sigmoid(double x);
double logsumexp(const std::vector<double>& xs);

// Utility of consuming an item with score s after waiting dt steps: s / dt^alpha.
double phi(double score, double latency, double alpha);

// Pairwise margin between a preferred and a dispreferred item. For LogDiff the
// difference is clamped at 1e-6 before the log; *clamped reports when that fires.
double margin(const MarginSpec& spec, double score_p, double latency_p, double score_d,
              double latency_d, bool* clamped = nullptr);

double bt_margin_prob(double reward_p, double reward_d, double gamma);

// Margin-boosted Plackett-Luce likelihood of ranking `order` (order[r] = index
// ranked at position r). gamma must be antisymmetric with zero diagonal.
double pl_ranking_loglik(const std::vector<double>& rewards,
                         const std::vector<std::vector<double>>& gamma,
                         const std::vector<int>& order);
double pl_ranking_likelihood(const std::vector<double>& rewards,
                             const std::vector<std::vector<double>>& gamma,
                             const std::vector<int>& order);

// Canonical antisymmetric extension of the pairwise margin: upper triangle from
// margin(), lower triangle mirrored with negation.
std::vector<std::vector<double>> antisymmetric_margins(const std::vector<ItemEvidence>& items,
                                                       const MarginSpec& spec);

// Probability that the preferred item wins its group outright, with the
// aggregated boost exp(-sum gamma) applied to the preferred weight.
double group_preference_prob(double reward_p, const std::vector<double>& rewards_d,
                             const std::vector<double>& gammas);

struct GroupLogProbs {
    double theta_p = 0.0;
    double ref_p = 0.0;
    std::vector<double> theta_d;
    std::vector<double> ref_d;
};

struct GroupLossResult {
    double loss = 0.0;
    double grad_pref = 0.0;             // d loss / d theta_p
    std::vector<double> grad_disp;      // d loss / d theta_d[j]
    std::vector<double> margins;        // gamma_j actually applied
    int clamped_margins = 0;            // LogDiff clamp events in this group
};

GroupLossResult dpo_loss_grad(double theta_p, double ref_p, double theta_d, double ref_d,
                              double beta);

GroupLossResult simpo_loss_grad(double theta_p, double theta_d, double beta, double gamma0,
                                double len_p = 1.0, double len_d = 1.0);

GroupLossResult sdpo_loss_grad(const GroupLogProbs& lp, double beta);

GroupLossResult recpo_loss_grad(const GroupLogProbs& lp, const PreferenceGroup& group,
                                double beta, const MarginSpec& spec);

}  // namespace recpo
