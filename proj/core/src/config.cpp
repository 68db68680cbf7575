#include "recpo/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace recpo {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw std::invalid_argument("config: " + path + " " + why);
}

double as_double(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "must be a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "must be an integer");
    return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "must be an integer");
    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
        fail(path, "must be >= 0");
    return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "must be a boolean");
    return v.get<bool>();
}

std::string as_str(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "must be a string");
    return v.get<std::string>();
}

std::vector<int> as_int_list(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "must be an array of integers");
    std::vector<int> out;
    for (const auto& e : v) out.push_back(as_int(e, path + " element"));
    return out;
}

std::vector<double> as_double_list(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(as_double(e, path + " element"));
    return out;
}

MarginSpec margin_from_json(const json& j) {
    if (!j.is_object()) fail("margin", "must be an object");
    MarginSpec spec;
    for (const auto& [key, v] : j.items()) {
        const std::string path = "margin." + key;
        if (key == "kind") spec.kind = margin_kind_from_string(as_str(v, path));
        else if (key == "lambda") spec.lambda = as_double(v, path);
        else if (key == "alpha") spec.alpha = as_double(v, path);
        else if (key == "sign") spec.sign = margin_sign_from_string(as_str(v, path));
        else if (key == "default_score") spec.default_score = as_double(v, path);
        else if (key == "default_latency") spec.default_latency = as_double(v, path);
        else fail(path, "is not a margin setting");
    }
    return spec;
}

PolicyConfig policy_from_json(const json& j) {
    if (!j.is_object()) fail("policy", "must be an object");
    PolicyConfig pc;
    for (const auto& [key, v] : j.items()) {
        const std::string path = "policy." + key;
        if (key == "dim") pc.dim = as_int(v, path);
        else if (key == "init_range") pc.init_range = as_double(v, path);
        else if (key == "recency_decay") pc.recency_decay = as_double(v, path);
        else if (key == "score_gain") pc.score_gain = as_double(v, path);
        else fail(path, "is not a policy setting");
    }
    return pc;
}

OptimConfig optim_from_json(const json& j) {
    if (!j.is_object()) fail("optim", "must be an object");
    OptimConfig oc;
    for (const auto& [key, v] : j.items()) {
        const std::string path = "optim." + key;
        if (key == "lr_sft") oc.lr_sft = as_double(v, path);
        else if (key == "lr_align") oc.lr_align = as_double(v, path);
        else if (key == "epochs") oc.epochs = as_int(v, path);
        else if (key == "batch_size") oc.batch_size = as_int(v, path);
        else if (key == "weight_decay") oc.weight_decay = as_double(v, path);
        else if (key == "patience") oc.patience = as_int(v, path);
        else if (key == "divergence_threshold") oc.divergence_threshold = as_double(v, path);
        else fail(path, "is not an optimizer setting");
    }
    return oc;
}

}  // namespace

ordered_json run_config_to_json(const RunConfig& cfg) {
    ordered_json j;
    j["beta"] = cfg.beta;
    j["negatives_per_group"] = cfg.negatives_per_group;
    j["candidate_size"] = cfg.candidate_size;
    j["history_mode"] = to_string(cfg.history_mode);
    j["include_scores"] = cfg.include_scores;
    j["seed"] = cfg.seed;
    j["margin"] = {
        {"kind", to_string(cfg.margin.kind)},
        {"lambda", cfg.margin.lambda},
        {"alpha", cfg.margin.alpha},
        {"sign", to_string(cfg.margin.sign)},
        {"default_score", cfg.margin.default_score},
        {"default_latency", cfg.margin.default_latency},
    };
    j["latency_mode"] = to_string(cfg.latency_mode);
    j["objective"] = to_string(cfg.objective);
    j["simpo_margin"] = cfg.simpo_margin;
    j["per_user_cap"] = cfg.per_user_cap;
    j["kcore"] = cfg.kcore;
    j["jobs"] = cfg.jobs;
    j["percentile_pool"] = to_string(cfg.percentile_pool);
    j["bucket_edges"] = cfg.bucket_edges;
    j["policy"] = {
        {"dim", cfg.policy.dim},
        {"init_range", cfg.policy.init_range},
        {"recency_decay", cfg.policy.recency_decay},
        {"score_gain", cfg.policy.score_gain},
    };
    j["optim"] = {
        {"lr_sft", cfg.optim.lr_sft},
        {"lr_align", cfg.optim.lr_align},
        {"epochs", cfg.optim.epochs},
        {"batch_size", cfg.optim.batch_size},
        {"weight_decay", cfg.optim.weight_decay},
        {"patience", cfg.optim.patience},
        {"divergence_threshold", cfg.optim.divergence_threshold},
    };
    return j;
}

ordered_json synthetic_spec_to_json(const SyntheticSpec& spec) {
    ordered_json j;
    j["num_users"] = spec.num_users;
    j["num_items"] = spec.num_items;
    j["min_len"] = spec.min_len;
    j["max_len"] = spec.max_len;
    j["latent_dim"] = spec.latent_dim;
    j["drift"] = spec.drift;
    j["noise"] = spec.noise;
    j["thresholds"] = spec.thresholds;
    j["seed"] = spec.seed;
    return j;
}

RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: root must be an object");
    RunConfig cfg;
    for (const auto& [key, v] : j.items()) {
        if (key == "beta") cfg.beta = as_double(v, key);
        else if (key == "negatives_per_group") cfg.negatives_per_group = as_int(v, key);
        else if (key == "candidate_size") cfg.candidate_size = as_int(v, key);
        else if (key == "history_mode") cfg.history_mode = history_mode_from_string(as_str(v, key));
        else if (key == "include_scores") cfg.include_scores = as_bool(v, key);
        else if (key == "seed") cfg.seed = as_u64(v, key);
        else if (key == "margin") cfg.margin = margin_from_json(v);
        else if (key == "latency_mode") cfg.latency_mode = latency_mode_from_string(as_str(v, key));
        else if (key == "objective") cfg.objective = objective_from_string(as_str(v, key));
        else if (key == "simpo_margin") cfg.simpo_margin = as_double(v, key);
        else if (key == "per_user_cap") cfg.per_user_cap = as_int(v, key);
        else if (key == "kcore") cfg.kcore = as_int(v, key);
        else if (key == "jobs") cfg.jobs = as_int(v, key);
        else if (key == "percentile_pool")
            cfg.percentile_pool = percentile_pool_from_string(as_str(v, key));
        else if (key == "bucket_edges") cfg.bucket_edges = as_int_list(v, key);
        else if (key == "policy") cfg.policy = policy_from_json(v);
        else if (key == "optim") cfg.optim = optim_from_json(v);
        else if (key == "synthetic") continue;  // sibling block, parsed separately
        else fail(key, "is not a config setting");
    }
    check_run_config(cfg);
    return cfg;
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: synthetic must be an object");
    SyntheticSpec spec;
    for (const auto& [key, v] : j.items()) {
        const std::string path = "synthetic." + key;
        if (key == "num_users") spec.num_users = as_int(v, path);
        else if (key == "num_items") spec.num_items = as_int(v, path);
        else if (key == "min_len") spec.min_len = as_int(v, path);
        else if (key == "max_len") spec.max_len = as_int(v, path);
        else if (key == "latent_dim") spec.latent_dim = as_int(v, path);
        else if (key == "drift") spec.drift = as_double(v, path);
        else if (key == "noise") spec.noise = as_double(v, path);
        else if (key == "thresholds") spec.thresholds = as_double_list(v, path);
        else if (key == "seed") spec.seed = as_u64(v, path);
        else fail(path, "is not a synthetic setting");
    }
    check_synthetic_spec(spec);
    return spec;
}

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
    }
    return j;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(read_json_file(path));
}

json default_config_json() {
    json base = run_config_to_json(RunConfig{});
    base["synthetic"] = synthetic_spec_to_json(SyntheticSpec{});
    return base;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
    const json j = read_json_file(path);
    if (!j.contains("synthetic"))
        throw std::runtime_error("config: " + path + " has no synthetic block");
    return synthetic_spec_from_json(j.at("synthetic"));
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("config: override must look like key=value, got '" +
                                    assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    json* slot = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (!slot->is_object() || !slot->contains(part))
            throw std::invalid_argument("config: override names unknown key '" + key + "'");
        slot = &(*slot)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }

    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // bare words become strings

    if (slot->is_string() && !value.is_string())
        value = raw;  // quote-free enum names like history_mode=full
    else if (slot->is_number() && !value.is_number())
        throw std::invalid_argument("config: override '" + key + "' needs a number");
    else if (slot->is_boolean() && !value.is_boolean())
        throw std::invalid_argument("config: override '" + key + "' needs true or false");
    else if (slot->is_array() && !value.is_array())
        throw std::invalid_argument("config: override '" + key + "' needs an array");
    *slot = std::move(value);
}

}  // namespace recpo
