#pragma once

#include <span>

#include <json.hpp>

#include "cbus/core.hpp"
#include "cbus/envs.hpp"
#include "cbus/harness.hpp"
#include "cbus/oracle.hpp"

namespace cbus {

// Instance document: top-level keys `contexts`, `policies`, `mu_b`, `delta`,
// `user`, `epsilon`; tables are nested arrays, indices 0-based.
nlohmann::json instance_to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& j);

GeneratorSpec generator_spec_from_json(const nlohmann::json& j);

nlohmann::json ground_truth_to_json(const GroundTruth& truth);

// Experiment document: `instance` (generator object or file path string),
// `algo` object, `T`, `replications`, `seed`, `out`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

nlohmann::json summary_to_json(const ExperimentSummary& summary);

nlohmann::json tradeoff_rows_to_json(std::span<const TradeoffRow> rows);

}  // namespace cbus
