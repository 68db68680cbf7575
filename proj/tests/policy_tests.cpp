#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "recpo/policy.hpp"
#include "recpo/train.hpp"
#include "support.hpp"

using namespace recpo;
using namespace testsupport;

namespace {

PolicyParams random_policy(int vocab, int dim, std::mt19937_64& gen) {
    PolicyParams p;
    p.vocab_size = vocab;
    p.dim = dim;
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    p.embeddings.resize(static_cast<std::size_t>(vocab) * dim);
    p.bias.resize(vocab);
    for (double& x : p.embeddings) x = u(gen);
    for (double& x : p.bias) x = u(gen);
    p.recency_decay = 0.5 + 0.4 * std::uniform_real_distribution<double>(0, 1)(gen);
    p.score_gain = u(gen);
    return p;
}

std::vector<HistoryStep> random_history(int vocab, int len, std::mt19937_64& gen) {
    std::vector<HistoryStep> h;
    for (int t = 0; t < len; ++t) {
        HistoryStep s;
        s.item_index = static_cast<int>(gen() % vocab);
        s.score = 1.0 + static_cast<double>(gen() % 5);
        s.position = t;
        h.push_back(s);
    }
    return h;
}

// Pack order: embeddings, bias, decay, gain. Mirrors pack order in the grads.
std::vector<double> pack_params(const PolicyParams& p) {
    std::vector<double> x(p.embeddings);
    x.insert(x.end(), p.bias.begin(), p.bias.end());
    x.push_back(p.recency_decay);
    x.push_back(p.score_gain);
    return x;
}

PolicyParams unpack_params(const PolicyParams& shape, const std::vector<double>& x) {
    PolicyParams p = shape;
    const std::size_t ne = shape.embeddings.size();
    const std::size_t nb = shape.bias.size();
    std::copy(x.begin(), x.begin() + ne, p.embeddings.begin());
    std::copy(x.begin() + ne, x.begin() + ne + nb, p.bias.begin());
    p.recency_decay = x[ne + nb];
    p.score_gain = x[ne + nb + 1];
    return p;
}

std::vector<double> pack_policy_grad(const PolicyGrad& g) {
    std::vector<double> x(g.embeddings);
    x.insert(x.end(), g.bias.begin(), g.bias.end());
    x.push_back(g.recency_decay);
    x.push_back(g.score_gain);
    return x;
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("log-probabilities always exponentiate to a distribution") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const int vocab = 2 + static_cast<int>(gen() % 30);
        const int dim = 2 + static_cast<int>(gen() % 6);
        const auto p = random_policy(vocab, dim, gen);
        const int len = 1 + static_cast<int>(gen() % 6);
        const auto h = random_history(vocab, len, gen);
        const auto table = forward_logprobs(p, h, len - 1);
        REQUIRE(static_cast<int>(table.logp.size()) == vocab);
        double total = 0.0;
        for (const double lp : table.logp) {
            CHECK(std::isfinite(lp));
            CHECK(lp <= 1e-12);
            total += std::exp(lp);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("all-zero parameters score every item uniformly") {
    PolicyParams p;
    p.vocab_size = 7;
    p.dim = 3;
    p.embeddings.assign(7 * 3, 0.0);
    p.bias.assign(7, 0.0);
    const auto table = forward_logprobs(p, {{2, 4.0, 0}}, 0);
    for (const double lp : table.logp) CHECK(lp == doctest::Approx(-std::log(7.0)).epsilon(1e-12));
}

TEST_CASE("three-item forward matches a hand computation") {
    PolicyParams p;
    p.vocab_size = 3;
    p.dim = 2;
    p.embeddings = {1.0, 0.0,   // item 0
                    0.0, 1.0,   // item 1
                    1.0, 1.0};  // item 2
    p.bias = {0.1, -0.2, 0.0};
    p.recency_decay = 0.5;
    p.score_gain = 0.5;

    // history: item 0 at position 0 (score 5), item 1 at position 1 (score 2)
    const std::vector<HistoryStep> h = {{0, 5.0, 0}, {1, 2.0, 1}};
    const int cut = 1;
    // weights: 0.5^1 * (1 + 0.5*2) = 1.0 for item 0; 0.5^0 * (1 + 0.5*(-1)) = 0.5 for item 1
    double cx = 1.0 * 1.0 + 0.5 * 0.0;
    double cy = 1.0 * 0.0 + 0.5 * 1.0;
    const double n = std::sqrt(cx * cx + cy * cy);
    cx /= n;
    cy /= n;
    const double z0 = 0.1 + cx;
    const double z1 = -0.2 + cy;
    const double z2 = 0.0 + cx + cy;
    const double lse = std::log(std::exp(z0) + std::exp(z1) + std::exp(z2));

    const auto table = forward_logprobs(p, h, cut);
    CHECK(table.logp[0] == doctest::Approx(z0 - lse).epsilon(1e-12));
    CHECK(table.logp[1] == doctest::Approx(z1 - lse).epsilon(1e-12));
    CHECK(table.logp[2] == doctest::Approx(z2 - lse).epsilon(1e-12));
}

TEST_CASE("zero-range initialization pins the nll to log vocab size") {
    PolicyConfig cfg;
    cfg.dim = 4;
    cfg.init_range = 0.0;
    const auto p = init_policy(20, cfg, 9);
    const auto r = sft_loss_grad(p, {{3, 5.0, 0}, {8, 2.0, 1}}, 1, 12);
    CHECK(r.loss == doctest::Approx(std::log(20.0)).epsilon(1e-9));
}

TEST_CASE("initialization is deterministic in the seed and bounded by the range") {
    PolicyConfig cfg;
    const auto a = init_policy(15, cfg, 77);
    const auto b = init_policy(15, cfg, 77);
    CHECK(a.embeddings == b.embeddings);
    CHECK(a.bias == b.bias);
    const auto c = init_policy(15, cfg, 78);
    CHECK(a.embeddings != c.embeddings);
    for (const double x : a.embeddings) CHECK(std::abs(x) <= cfg.init_range);
    for (const double x : a.bias) CHECK(x == 0.0);
}

TEST_CASE("weighted backward matches central differences on every parameter") {
    std::mt19937_64 gen(23);
    for (int trial = 0; trial < 12; ++trial) {
        const int vocab = 4 + static_cast<int>(gen() % 5);
        const int dim = 2 + static_cast<int>(gen() % 3);
        const auto shape = random_policy(vocab, dim, gen);
        const int len = 2 + static_cast<int>(gen() % 3);
        const auto h = random_history(vocab, len, gen);
        const int cut = len - 1;
        std::vector<std::pair<int, double>> weights;
        for (int j = 0; j < 3; ++j)
            weights.emplace_back(static_cast<int>(gen() % vocab),
                                 -1.0 + 2.0 * (static_cast<double>(gen() % 100) / 99.0));

        auto objective = [&](const PolicyParams& p) {
            const auto table = forward_logprobs(p, h, cut);
            double v = 0.0;
            for (const auto& [idx, w] : weights) v += w * table.logp[idx];
            return v;
        };

        PolicyGrad grad = PolicyGrad::zeros(vocab, dim);
        accumulate_weighted_grad(shape, h, cut, weights, grad);

        const auto f = [&](const std::vector<double>& x) {
            return objective(unpack_params(shape, x));
        };
        const double err = grad_check(f, pack_params(shape), pack_policy_grad(grad), 1e-5);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("nll backward matches central differences") {
    std::mt19937_64 gen(29);
    for (int trial = 0; trial < 12; ++trial) {
        const int vocab = 5 + static_cast<int>(gen() % 4);
        const auto shape = random_policy(vocab, 3, gen);
        const auto h = random_history(vocab, 3, gen);
        const int target = static_cast<int>(gen() % vocab);
        const auto r = sft_loss_grad(shape, h, 2, target);
        CHECK(r.loss > 0.0);
        const auto f = [&](const std::vector<double>& x) {
            const auto p = unpack_params(shape, x);
            return sft_loss_grad(p, h, 2, target).loss;
        };
        const double err = grad_check(f, pack_params(shape), pack_policy_grad(r.grad), 1e-5);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("gradient accumulation adds rather than overwrites") {
    std::mt19937_64 gen(31);
    const auto p = random_policy(6, 3, gen);
    const auto h = random_history(6, 2, gen);
    PolicyGrad once = PolicyGrad::zeros(6, 3);
    accumulate_weighted_grad(p, h, 1, {{2, 1.0}}, once);
    PolicyGrad twice = PolicyGrad::zeros(6, 3);
    accumulate_weighted_grad(p, h, 1, {{2, 1.0}}, twice);
    accumulate_weighted_grad(p, h, 1, {{2, 1.0}}, twice);
    for (std::size_t i = 0; i < once.embeddings.size(); ++i)
        CHECK(twice.embeddings[i] == doctest::Approx(2.0 * once.embeddings[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < once.bias.size(); ++i)
        CHECK(twice.bias[i] == doctest::Approx(2.0 * once.bias[i]).epsilon(1e-12));
    CHECK(twice.recency_decay == doctest::Approx(2.0 * once.recency_decay).epsilon(1e-12));
    CHECK(twice.score_gain == doctest::Approx(2.0 * once.score_gain).epsilon(1e-12));
}

TEST_CASE("without decay or score gain the context ignores history order") {
    std::mt19937_64 gen(37);
    auto p = random_policy(9, 3, gen);
    p.recency_decay = 1.0;
    p.score_gain = 0.0;
    auto h = random_history(9, 5, gen);
    const auto base = forward_logprobs(p, h, 4);
    std::shuffle(h.begin(), h.end(), gen);
    const auto shuffled = forward_logprobs(p, h, 4);
    for (std::size_t i = 0; i < base.logp.size(); ++i)
        CHECK(base.logp[i] == doctest::Approx(shuffled.logp[i]).epsilon(1e-12));
}

TEST_CASE("reference snapshots are deep and stable") {
    std::mt19937_64 gen(41);
    const auto p = random_policy(5, 2, gen);
    auto live = p;
    const auto ref = snapshot_reference(live);
    live.embeddings[0] += 10.0;
    live.bias[1] -= 3.0;
    CHECK(ref.embeddings == p.embeddings);
    CHECK(ref.bias == p.bias);
    const auto ref2 = snapshot_reference(ref);
    CHECK(ref2.embeddings == ref.embeddings);
    CHECK(ref2.recency_decay == ref.recency_decay);
}

TEST_CASE("checkpoints round-trip bit for bit") {
    std::mt19937_64 gen(43);
    const auto p = random_policy(8, 3, gen);
    const auto vocab = ItemVocab::from_ids({3, 7, 11, 20, 21, 22, 40, 99});
    TempDir dir;
    save_policy(dir.file("p.ckpt"), p, vocab);
    const auto [q, v2] = load_policy(dir.file("p.ckpt"));
    CHECK(q.embeddings == p.embeddings);
    CHECK(q.bias == p.bias);
    CHECK(q.recency_decay == p.recency_decay);
    CHECK(q.score_gain == p.score_gain);
    CHECK(v2.ids == vocab.ids);
    save_policy(dir.file("p2.ckpt"), q, v2);
    CHECK(read_file(dir.file("p.ckpt")) == read_file(dir.file("p2.ckpt")));
}

TEST_CASE("corrupt checkpoints are rejected") {
    TempDir dir;
    write_file(dir.file("junk.ckpt"), "definitely not a checkpoint");
    CHECK_THROWS_AS(load_policy(dir.file("junk.ckpt")), std::runtime_error);
    CHECK_THROWS_AS(load_policy(dir.file("absent.ckpt")), std::runtime_error);
}

TEST_CASE("forward rejects malformed contexts") {
    std::mt19937_64 gen(47);
    const auto p = random_policy(4, 2, gen);
    CHECK_THROWS_AS(forward_logprobs(p, {}, 0), std::invalid_argument);
    CHECK_THROWS_AS(forward_logprobs(p, {{9, 3.0, 0}}, 0), std::invalid_argument);
    CHECK_THROWS_AS(forward_logprobs(p, {{1, 3.0, 5}}, 2), std::invalid_argument);
    CHECK_THROWS_AS(sft_loss_grad(p, {{1, 3.0, 0}}, 0, 99), std::invalid_argument);
}

TEST_CASE("parameter validation catches shape and range errors") {
    std::mt19937_64 gen(53);
    auto p = random_policy(4, 2, gen);
    CHECK_NOTHROW(check_policy(p));
    p.recency_decay = 0.0;
    CHECK_THROWS_AS(check_policy(p), std::invalid_argument);
    p = random_policy(4, 2, gen);
    p.embeddings.pop_back();
    CHECK_THROWS_AS(check_policy(p), std::invalid_argument);
    p = random_policy(4, 2, gen);
    p.bias[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(check_policy(p), std::invalid_argument);
}

}  // TEST_SUITE
