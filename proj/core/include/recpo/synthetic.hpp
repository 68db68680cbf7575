#pragma once

#include <cstdint>
#include <vector>

#include "recpo/dataset.hpp"

namespace recpo {

struct SyntheticSpec {
    int num_users = 50;
    int num_items = 200;
    int min_len = 20;
    int max_len = 40;
    int latent_dim = 8;
    double drift = 0.9;  // rho: 1 freezes the latent, 0 resamples it every step
    double noise = 0.25;
    std::vector<double> thresholds = {-1.2, -0.4, 0.4, 1.2};
    std::uint64_t seed = 17;
};

void check_synthetic_spec(const SyntheticSpec& spec);

struct SyntheticData {
    Dataset data;
    // item_vectors[i] is the latent for item id i+1; user_latents[u][t] is the
    // post-drift state used at step t. Exposed so tests can probe recency.
    std::vector<std::vector<double>> item_vectors;
    std::vector<std::vector<std::vector<double>>> user_latents;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace recpo
