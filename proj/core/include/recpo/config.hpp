#pragma once

#include <string>

#include "json.hpp"
#include "recpo/synthetic.hpp"
#include "recpo/types.hpp"

namespace recpo {

// JSON echoes use ordered_json so serialized configs are byte-stable across
// runs; key order matches the struct declaration order.
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);
nlohmann::ordered_json synthetic_spec_to_json(const SyntheticSpec& spec);

// Strict parsers: unknown keys and type mismatches throw, partial objects
// fall back to defaults field by field. The run-config parser ignores a
// top-level "synthetic" block so one file can configure a whole experiment.
RunConfig run_config_from_json(const nlohmann::json& j);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);
SyntheticSpec load_synthetic_spec(const std::string& path);

// Full default tree (run config plus "synthetic" block). Overlaying a config
// file onto this with merge_patch gives every override a key to land on.
nlohmann::json default_config_json();

// One `--set path.to.key=value` override. The dotted path must name a key
// that already exists in `j` and the parsed value must keep its JSON type
// (numbers stay numbers, arrays stay arrays, ...).
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace recpo
