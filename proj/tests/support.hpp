#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// deliberately avoid the library's code paths: permutation enumeration uses
// direct products, gradients come from central differences, percentiles from
// a naive sort, so agreement is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "recpo/dataset.hpp"
#include "recpo/objectives.hpp"
#include "recpo/types.hpp"

namespace testsupport {

struct Ev {
    std::int64_t item;
    double score;
    std::int64_t ts;
};

inline recpo::UserSequence make_user(std::int64_t user_id, const std::vector<Ev>& evs) {
    recpo::UserSequence seq;
    seq.user_id = user_id;
    int pos = 0;
    for (const Ev& e : evs) seq.interactions.push_back({e.item, e.score, e.ts, pos++});
    return seq;
}

// Ten-interaction user covering both high and low scores, items 1..10.
inline recpo::UserSequence standard_user(std::int64_t user_id = 7) {
    return make_user(user_id, {{1, 5, 10},
                               {2, 2, 20},
                               {3, 4, 30},
                               {4, 3, 40},
                               {5, 5, 50},
                               {6, 1, 60},
                               {7, 4, 70},
                               {8, 2, 80},
                               {9, 4, 90},
                               {10, 5, 100}});
}

inline recpo::Dataset tiny_dataset(int num_users = 4, int vocab = 40) {
    recpo::Dataset data;
    for (std::int64_t i = 1; i <= vocab; ++i) data.titles[i] = "Item " + std::to_string(i);
    std::mt19937_64 gen(99);
    for (int u = 0; u < num_users; ++u) {
        std::vector<Ev> evs;
        const int len = 8 + static_cast<int>(gen() % 5);
        std::vector<std::int64_t> pool(vocab);
        std::iota(pool.begin(), pool.end(), 1);
        std::shuffle(pool.begin(), pool.end(), gen);
        for (int k = 0; k < len; ++k) {
            const double score = 1.0 + static_cast<double>(gen() % 5);
            evs.push_back({pool[k], score, 10 * (k + 1)});
        }
        // high-scored tail so the user survives eval retention
        evs[evs.size() - 2].score = 5;
        evs[evs.size() - 1].score = 4;
        data.users.push_back(make_user(100 + u, evs));
    }
    return data;
}

// Naive utility and margin, written independently of objectives.cpp.
inline double oracle_phi(double s, double dt, double alpha) { return s / std::pow(dt, alpha); }

inline double oracle_margin(const recpo::MarginSpec& spec, double sp, double dtp, double sd,
                            double dtd) {
    const double fp = oracle_phi(sp, dtp, spec.alpha);
    const double fd = oracle_phi(sd, dtd, spec.alpha);
    switch (spec.kind) {
        case recpo::MarginKind::Ratio: return spec.lambda * fp / fd;
        case recpo::MarginKind::LogDiff:
            return spec.lambda * std::log(std::max(fp - fd, 1e-6));
        case recpo::MarginKind::LogRatio: return spec.lambda * (std::log(fp) - std::log(fd));
    }
    return 0.0;
}

// Margin-boosted PL probability of one permutation, straight product form in
// long double. No log-space tricks; only usable away from extreme inputs.
inline double oracle_pl_prob(const std::vector<double>& rewards,
                             const std::vector<std::vector<double>>& gamma,
                             const std::vector<int>& order) {
    const int k = static_cast<int>(rewards.size());
    std::vector<int> remaining(k);
    std::iota(remaining.begin(), remaining.end(), 0);
    long double prob = 1.0L;
    for (const int pick : order) {
        long double num = 0.0L, den = 0.0L;
        for (const int cand : remaining) {
            long double boost = 0.0L;
            for (const int other : remaining)
                if (other != cand) boost -= gamma[cand][other];
            const long double w = std::exp(static_cast<long double>(rewards[cand]) + boost);
            den += w;
            if (cand == pick) num = w;
        }
        prob *= num / den;
        remaining.erase(std::find(remaining.begin(), remaining.end(), pick));
    }
    return static_cast<double>(prob);
}

// All permutations of 0..k-1.
inline std::vector<std::vector<int>> all_orders(int k) {
    std::vector<int> base(k);
    std::iota(base.begin(), base.end(), 0);
    std::vector<std::vector<int>> out;
    do {
        out.push_back(base);
    } while (std::next_permutation(base.begin(), base.end()));
    return out;
}

// Central-difference gradient of a scalar function of a flat vector.
inline std::vector<double> numeric_grad(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// The denominator floor absorbs central-difference rounding noise: at step
// 1e-5 an O(10) loss carries ~1e-10 of it, so coordinates below 1e-5 are held
// to |a-n| < 1e-9 by the caller's 1e-4 threshold instead of a noise quotient.
inline double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double err =
            std::abs(analytic[i] - numeric[i]) / std::max(1e-5, std::abs(numeric[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

// Flattens GroupLogProbs theta entries (pref first, then negatives) so group
// losses can be finite-differenced uniformly.
inline std::vector<double> pack_theta(const recpo::GroupLogProbs& lp) {
    std::vector<double> x;
    x.push_back(lp.theta_p);
    for (const double v : lp.theta_d) x.push_back(v);
    return x;
}

inline recpo::GroupLogProbs with_theta(recpo::GroupLogProbs lp, const std::vector<double>& x) {
    lp.theta_p = x[0];
    for (std::size_t j = 0; j + 1 < x.size(); ++j) lp.theta_d[j] = x[j + 1];
    return lp;
}

inline std::vector<double> pack_grad(const recpo::GroupLossResult& r) {
    std::vector<double> g;
    g.push_back(r.grad_pref);
    for (const double v : r.grad_disp) g.push_back(v);
    return g;
}

// Reference percentile conversion: per-pool ascending sort, 1-based average
// rank over ties, pct = rank/n, buckets (0.8,1]->5 ... [0,0.2]->1.
inline double oracle_percentile_score(const std::vector<double>& pool, double value) {
    std::vector<double> sorted = pool;
    std::sort(sorted.begin(), sorted.end());
    double rank_sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] == value) {
            rank_sum += static_cast<double>(i + 1);
            ++count;
        }
    }
    const double pct = (rank_sum / count) / static_cast<double>(sorted.size());
    if (pct > 0.8) return 5;
    if (pct > 0.6) return 4;
    if (pct > 0.4) return 3;
    if (pct > 0.2) return 2;
    return 1;
}

// Scratch directory removed on scope exit; unique per instantiation.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static int counter = 0;
        std::random_device rd;
        path = std::filesystem::temp_directory_path() /
               ("recpo_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testsupport
