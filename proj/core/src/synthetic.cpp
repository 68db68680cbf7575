#include "recpo/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "recpo/rng.hpp"

namespace recpo {

namespace {

void normalize(std::vector<double>& v) {
    double n2 = 0.0;
    for (const double x : v) n2 += x * x;
    const double n = std::sqrt(n2);
    if (n > 0.0)
        for (double& x : v) x /= n;
}

std::vector<double> random_unit(Rng& rng, int dim) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    normalize(v);
    return v;
}

int sample_softmax(const std::vector<double>& affinity, Rng& rng) {
    const double m = *std::max_element(affinity.begin(), affinity.end());
    double total = 0.0;
    std::vector<double> w(affinity.size());
    for (std::size_t i = 0; i < affinity.size(); ++i) {
        w[i] = std::exp(affinity[i] - m);
        total += w[i];
    }
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(w.size()) - 1;
}

}  // namespace

void check_synthetic_spec(const SyntheticSpec& spec) {
    if (spec.num_users < 1) throw std::invalid_argument("synthetic: num_users must be >= 1");
    if (spec.num_items < 2) throw std::invalid_argument("synthetic: num_items must be >= 2");
    if (spec.min_len < 3) throw std::invalid_argument("synthetic: min_len must be >= 3");
    if (spec.max_len < spec.min_len)
        throw std::invalid_argument("synthetic: max_len must be >= min_len");
    if (spec.latent_dim < 1) throw std::invalid_argument("synthetic: latent_dim must be >= 1");
    if (!(spec.drift >= 0.0 && spec.drift <= 1.0))
        throw std::invalid_argument("synthetic: drift must lie in [0,1]");
    if (!(spec.noise >= 0.0)) throw std::invalid_argument("synthetic: noise must be >= 0");
    if (spec.thresholds.size() != 4)
        throw std::invalid_argument("synthetic: exactly 4 rating thresholds required");
    for (std::size_t i = 1; i < spec.thresholds.size(); ++i)
        if (!(spec.thresholds[i - 1] < spec.thresholds[i]))
            throw std::invalid_argument("synthetic: thresholds must be strictly increasing");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    check_synthetic_spec(spec);

    SyntheticData out;
    Rng item_rng = stream_rng(spec.seed, StreamTag::Synthetic, 0, 0);
    out.item_vectors.resize(spec.num_items);
    for (auto& v : out.item_vectors) {
        v.resize(spec.latent_dim);
        for (double& x : v) x = item_rng.normal();
    }
    for (int i = 0; i < spec.num_items; ++i)
        out.data.titles[i + 1] = "Item " + std::to_string(i + 1);

    out.user_latents.resize(spec.num_users);
    for (int u = 0; u < spec.num_users; ++u) {
        Rng rng = stream_rng(spec.seed, StreamTag::Synthetic, 1 + static_cast<std::uint64_t>(u), 0);
        const int len = spec.min_len + static_cast<int>(rng.below(
                            static_cast<std::uint64_t>(spec.max_len - spec.min_len + 1)));

        UserSequence seq;
        seq.user_id = u + 1;
        seq.interactions.reserve(len);
        std::vector<double> latent = random_unit(rng, spec.latent_dim);
        std::vector<double> affinity(spec.num_items);
        for (int t = 0; t < len; ++t) {
            if (t > 0) {
                for (int d = 0; d < spec.latent_dim; ++d)
                    latent[d] = spec.drift * latent[d] + (1.0 - spec.drift) * rng.normal();
                normalize(latent);
            }
            out.user_latents[u].push_back(latent);

            for (int i = 0; i < spec.num_items; ++i) {
                double a = 0.0;
                for (int d = 0; d < spec.latent_dim; ++d) a += latent[d] * out.item_vectors[i][d];
                affinity[i] = a;
            }
            const int pick = sample_softmax(affinity, rng);

            int level = 1;
            for (const double thr : spec.thresholds)
                if (affinity[pick] > thr) ++level;
            const double score =
                std::clamp(static_cast<double>(level) + spec.noise * rng.normal(), 1.0, 5.0);

            Interaction it;
            it.item_id = pick + 1;
            it.score = score;
            it.timestamp = t;
            it.position = t;
            seq.interactions.push_back(it);
        }
        out.data.users.push_back(std::move(seq));
    }
    return out;
}

}  // namespace recpo
