#include "recpo/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace recpo {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double log_sigmoid(double x) { return -softplus(-x); }

double logsumexp(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("logsumexp: empty input");
    const double m = *std::max_element(xs.begin(), xs.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (const double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

double phi(double score, double latency, double alpha) {
    if (!(score > 0.0)) throw std::invalid_argument("phi: score must be > 0");
    if (!(latency >= 1.0)) throw std::invalid_argument("phi: latency must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("phi: alpha must be > 0");
    return score / std::pow(latency, alpha);
}

double margin(const MarginSpec& spec, double score_p, double latency_p, double score_d,
              double latency_d, bool* clamped) {
    if (clamped) *clamped = false;
    const double phi_p = phi(score_p, latency_p, spec.alpha);
    const double phi_d = phi(score_d, latency_d, spec.alpha);
    switch (spec.kind) {
        case MarginKind::Ratio:
            return spec.lambda * phi_p / phi_d;
        case MarginKind::LogDiff: {
            constexpr double kEps = 1e-6;
            double diff = phi_p - phi_d;
            if (diff < kEps) {
                diff = kEps;
                if (clamped) *clamped = true;
            }
            return spec.lambda * std::log(diff);
        }
        case MarginKind::LogRatio:
            return spec.lambda * (std::log(phi_p) - std::log(phi_d));
    }
    throw std::invalid_argument("margin: unknown kind");
}

double bt_margin_prob(double reward_p, double reward_d, double gamma) {
    return sigmoid(reward_p - reward_d - gamma);
}

double pl_ranking_loglik(const std::vector<double>& rewards,
                         const std::vector<std::vector<double>>& gamma,
                         const std::vector<int>& order) {
    const std::size_t k = rewards.size();
    if (k < 2) throw std::invalid_argument("pl_ranking_loglik: need at least 2 candidates");
    if (gamma.size() != k) throw std::invalid_argument("pl_ranking_loglik: gamma shape mismatch");
    for (std::size_t i = 0; i < k; ++i) {
        if (gamma[i].size() != k)
            throw std::invalid_argument("pl_ranking_loglik: gamma shape mismatch");
        for (std::size_t j = 0; j < k; ++j)
            if (std::abs(gamma[i][j] + gamma[j][i]) > 1e-9)
                throw std::invalid_argument("pl_ranking_loglik: gamma must be antisymmetric");
    }
    if (order.size() != k) throw std::invalid_argument("pl_ranking_loglik: order is not a permutation");
    std::vector<bool> seen(k, false);
    for (const int idx : order) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= k || seen[idx])
            throw std::invalid_argument("pl_ranking_loglik: order is not a permutation");
        seen[idx] = true;
    }

    // At each rank the remaining candidates compete; candidate k's log-weight is
    // its reward minus the margins it owes to the other survivors.
    double loglik = 0.0;
    for (std::size_t r = 0; r + 1 < k; ++r) {
        std::vector<double> logw;
        logw.reserve(k - r);
        double winner_logw = 0.0;
        for (std::size_t s = r; s < k; ++s) {
            const int cand = order[s];
            double lw = rewards[cand];
            for (std::size_t t = r; t < k; ++t)
                if (t != s) lw -= gamma[cand][order[t]];
            if (s == r) winner_logw = lw;
            logw.push_back(lw);
        }
        loglik += winner_logw - logsumexp(logw);
    }
    return loglik;
}

double pl_ranking_likelihood(const std::vector<double>& rewards,
                             const std::vector<std::vector<double>>& gamma,
                             const std::vector<int>& order) {
    return std::exp(pl_ranking_loglik(rewards, gamma, order));
}

std::vector<std::vector<double>> antisymmetric_margins(const std::vector<ItemEvidence>& items,
                                                       const MarginSpec& spec) {
    const std::size_t k = items.size();
    std::vector<std::vector<double>> gamma(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            const double g =
                margin(spec, items[i].score, items[i].latency, items[j].score, items[j].latency);
            gamma[i][j] = g;
            gamma[j][i] = -g;
        }
    return gamma;
}

double group_preference_prob(double reward_p, const std::vector<double>& rewards_d,
                             const std::vector<double>& gammas) {
    if (rewards_d.empty()) throw std::invalid_argument("group_preference_prob: need negatives");
    if (gammas.size() != rewards_d.size())
        throw std::invalid_argument("group_preference_prob: margin count mismatch");
    double boost = 0.0;
    for (const double g : gammas) boost += g;
    std::vector<double> logw;
    logw.reserve(rewards_d.size() + 1);
    logw.push_back(reward_p - boost);
    for (const double r : rewards_d) logw.push_back(r);
    return std::exp(logw.front() - logsumexp(logw));
}

namespace {

// Shared listwise kernel: loss = softplus(logsumexp_j(beta*(dtheta_j - dref_j)
// - beta*(dtheta_p - dref_p) + signed gamma_j)). S-DPO is this kernel with all
// margins zero, which keeps the lambda=0 reduction exact.
GroupLossResult listwise_kernel(const GroupLogProbs& lp, double beta,
                                const std::vector<double>& signed_gammas) {
    if (!(beta > 0.0)) throw std::invalid_argument("listwise loss: beta must be > 0");
    const std::size_t n = lp.theta_d.size();
    if (n == 0) throw std::invalid_argument("listwise loss: need at least one negative");
    if (lp.ref_d.size() != n || signed_gammas.size() != n)
        throw std::invalid_argument("listwise loss: per-negative sizes disagree");

    const double reward_p = beta * (lp.theta_p - lp.ref_p);
    std::vector<double> z(n);
    for (std::size_t j = 0; j < n; ++j)
        z[j] = beta * (lp.theta_d[j] - lp.ref_d[j]) - reward_p + signed_gammas[j];

    const double lse = logsumexp(z);
    const double sig = sigmoid(lse);

    GroupLossResult out;
    out.loss = softplus(lse);
    out.grad_pref = -beta * sig;
    out.grad_disp.resize(n);
    const double m = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (const double zj : z) denom += std::exp(zj - m);
    for (std::size_t j = 0; j < n; ++j)
        out.grad_disp[j] = beta * sig * std::exp(z[j] - m) / denom;
    return out;
}

}  // namespace

GroupLossResult dpo_loss_grad(double theta_p, double ref_p, double theta_d, double ref_d,
                              double beta) {
    GroupLogProbs lp;
    lp.theta_p = theta_p;
    lp.ref_p = ref_p;
    lp.theta_d = {theta_d};
    lp.ref_d = {ref_d};
    GroupLossResult out = listwise_kernel(lp, beta, {0.0});
    out.margins = {0.0};
    return out;
}

GroupLossResult simpo_loss_grad(double theta_p, double theta_d, double beta, double gamma0,
                                double len_p, double len_d) {
    if (!(beta > 0.0)) throw std::invalid_argument("simpo_loss_grad: beta must be > 0");
    if (!(len_p >= 1.0) || !(len_d >= 1.0))
        throw std::invalid_argument("simpo_loss_grad: lengths must be >= 1");
    const double u = (beta / len_p) * theta_p - (beta / len_d) * theta_d - gamma0;
    const double sig = sigmoid(-u);
    GroupLossResult out;
    out.loss = softplus(-u);
    out.grad_pref = -sig * beta / len_p;
    out.grad_disp = {sig * beta / len_d};
    out.margins = {gamma0};
    return out;
}

GroupLossResult sdpo_loss_grad(const GroupLogProbs& lp, double beta) {
    GroupLossResult out = listwise_kernel(lp, beta, std::vector<double>(lp.theta_d.size(), 0.0));
    out.margins.assign(lp.theta_d.size(), 0.0);
    return out;
}

GroupLossResult recpo_loss_grad(const GroupLogProbs& lp, const PreferenceGroup& group,
                                double beta, const MarginSpec& spec) {
    check_margin_spec(spec);
    const std::size_t n = group.dispreferred.size();
    if (lp.theta_d.size() != n || lp.ref_d.size() != n)
        throw std::invalid_argument("recpo_loss_grad: log-prob and group sizes disagree");

    if (spec.lambda == 0.0) {
        // Exact S-DPO reduction: margins vanish, item evidence is never consulted.
        return sdpo_loss_grad(lp, beta);
    }

    std::vector<double> gammas(n);
    int clamps = 0;
    for (std::size_t j = 0; j < n; ++j) {
        bool clamped = false;
        gammas[j] = margin(spec, group.preferred.score, group.preferred.latency,
                           group.dispreferred[j].score, group.dispreferred[j].latency, &clamped);
        if (clamped) ++clamps;
    }

    std::vector<double> signed_gammas(n);
    const double sign = spec.sign == MarginSign::SubtractGap ? 1.0 : -1.0;
    for (std::size_t j = 0; j < n; ++j) signed_gammas[j] = sign * gammas[j];

    GroupLossResult out = listwise_kernel(lp, beta, signed_gammas);
    out.margins = std::move(gammas);
    out.clamped_margins = clamps;
    return out;
}

}  // namespace recpo
