#include <benchmark/benchmark.h>

#include <vector>

#include "recpo/ingest.hpp"
#include "recpo/objectives.hpp"
#include "recpo/policy.hpp"
#include "recpo/rng.hpp"
#include "recpo/types.hpp"

namespace {

recpo::PolicyParams bench_policy(int vocab, int dim) {
    recpo::PolicyConfig cfg;
    cfg.dim = dim;
    return recpo::init_policy(vocab, cfg, 99);
}

std::vector<recpo::HistoryStep> bench_history(int len, int vocab) {
    std::vector<recpo::HistoryStep> h;
    recpo::Rng rng(7);
    for (int i = 0; i < len; ++i)
        h.push_back({static_cast<int>(rng.below(vocab)), 1.0 + double(rng.below(5)), i});
    return h;
}

void bm_forward_logprobs(benchmark::State& state) {
    const int vocab = static_cast<int>(state.range(0));
    const auto params = bench_policy(vocab, 32);
    const auto history = bench_history(24, vocab);
    for (auto _ : state) {
        auto table = recpo::forward_logprobs(params, history, 23);
        benchmark::DoNotOptimize(table.logp.data());
    }
}
BENCHMARK(bm_forward_logprobs)->Arg(200)->Arg(2000);

void bm_weighted_backward(benchmark::State& state) {
    const int vocab = static_cast<int>(state.range(0));
    const auto params = bench_policy(vocab, 32);
    const auto history = bench_history(24, vocab);
    std::vector<std::pair<int, double>> weights{{3, -1.0}, {11, 1.0}, {17, 1.0}};
    for (auto _ : state) {
        auto grad = recpo::PolicyGrad::zeros(vocab, 32);
        auto table = recpo::accumulate_weighted_grad(params, history, 23, weights, grad);
        benchmark::DoNotOptimize(grad.bias.data());
        benchmark::DoNotOptimize(table.logp.data());
    }
}
BENCHMARK(bm_weighted_backward)->Arg(200)->Arg(2000);

void bm_recpo_loss_grad(benchmark::State& state) {
    const int negatives = static_cast<int>(state.range(0));
    recpo::Rng rng(13);
    auto u = [&] { return rng.uniform01() * 4.0 - 2.0; };
    recpo::GroupLogProbs lp;
    lp.theta_p = u();
    lp.ref_p = u();
    recpo::PreferenceGroup group;
    group.preferred = {1, 5.0, 1.0};
    for (int j = 0; j < negatives; ++j) {
        lp.theta_d.push_back(u());
        lp.ref_d.push_back(u());
        group.dispreferred.push_back({2 + j, 1.0 + double(j % 4), 2.0 + j});
    }
    recpo::MarginSpec spec;
    spec.lambda = 2.0;
    for (auto _ : state) {
        auto r = recpo::recpo_loss_grad(lp, group, 1.0, spec);
        benchmark::DoNotOptimize(r.loss);
        benchmark::DoNotOptimize(r.grad_disp.data());
    }
}
BENCHMARK(bm_recpo_loss_grad)->Arg(3)->Arg(19);

void bm_pl_ranking_likelihood(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    recpo::Rng rng(29);
    std::vector<double> rewards;
    std::vector<recpo::ItemEvidence> items;
    std::vector<int> order;
    for (int i = 0; i < k; ++i) {
        rewards.push_back(rng.uniform01() * 2.0 - 1.0);
        items.push_back({i + 1, 1.0 + double(i % 5), 1.0 + i});
        order.push_back(i);
    }
    recpo::MarginSpec spec;
    spec.lambda = 1.0;
    const auto gamma = recpo::antisymmetric_margins(items, spec);
    for (auto _ : state) {
        const double p = recpo::pl_ranking_likelihood(rewards, gamma, order);
        benchmark::DoNotOptimize(p);
    }
}
BENCHMARK(bm_pl_ranking_likelihood)->Arg(4)->Arg(12);

void bm_kcore_filter(benchmark::State& state) {
    const int users = static_cast<int>(state.range(0));
    recpo::Rng rng(41);
    std::vector<recpo::RawEvent> events;
    for (int u = 1; u <= users; ++u) {
        const int n = 3 + static_cast<int>(rng.below(20));
        for (int i = 0; i < n; ++i)
            events.push_back({u, static_cast<std::int64_t>(1 + rng.below(users * 2)),
                              1.0 + double(rng.below(5)), i});
    }
    for (auto _ : state) {
        auto copy = events;
        auto kept = recpo::kcore_filter(std::move(copy), 5);
        benchmark::DoNotOptimize(kept.data());
    }
}
BENCHMARK(bm_kcore_filter)->Arg(200)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
