#include "cbus/json_io.hpp"

namespace cbus {

using nlohmann::json;

namespace {

json table_to_json(const std::vector<std::vector<double>>& t) { return json(t); }

std::vector<std::vector<double>> table_from_json(const json& j) {
  return j.get<std::vector<std::vector<double>>>();
}

// Wraps json access so malformed documents surface as ConfigError.
template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw ConfigError(std::string("config: missing key '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " +
                      e.what());
  }
}

template <typename T>
T optional_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " +
                      e.what());
  }
}

}  // namespace

json instance_to_json(const Instance& inst) {
  const int nx = inst.n_contexts();
  const int k = inst.n_actions();

  json policies = json::array();
  for (int p = 0; p < inst.n_policies(); ++p) {
    auto r = inst.policies.row(p);
    policies.push_back(std::vector<int>(r.begin(), r.end()));
  }

  json delta = json::array();
  for (int x = 0; x < nx; ++x) {
    json per_context = json::array();
    for (int a = 0; a < k; ++a) {
      std::vector<double> row(k);
      for (int b = 0; b < k; ++b) row[b] = inst.loss(x, a, b);
      per_context.push_back(row);
    }
    delta.push_back(per_context);
  }

  json user = {{"bar_a_probs", table_to_json(inst.user.bar_a_probs)},
               {"reveal_prob", table_to_json(inst.user.reveal_prob)},
               {"revealing_action", inst.user.revealing_action}};
  if (inst.user.trigger_slack) user["trigger_slack"] = *inst.user.trigger_slack;

  return {{"contexts",
           {{"n_contexts", nx}, {"probs", inst.contexts.probs}}},
          {"policies",
           {{"n_policies", inst.n_policies()},
            {"n_contexts", nx},
            {"n_actions", k},
            {"actions", policies}}},
          {"mu_b", table_to_json(inst.mu_b)},
          {"delta", delta},
          {"user", user},
          {"epsilon", inst.epsilon}};
}

Instance instance_from_json(const json& j) {
  Instance inst;
  const json& ctx = j.at("contexts");
  inst.contexts.n_contexts = require<int>(ctx, "n_contexts");
  inst.contexts.probs = require<std::vector<double>>(ctx, "probs");

  const json& pol = j.at("policies");
  const int n_pol = require<int>(pol, "n_policies");
  const int nx = require<int>(pol, "n_contexts");
  const int k = require<int>(pol, "n_actions");
  const auto rows = require<std::vector<std::vector<int>>>(pol, "actions");
  std::vector<int> flat;
  flat.reserve(static_cast<std::size_t>(n_pol) * nx);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  inst.policies = PolicyClass(n_pol, nx, k, std::move(flat));

  inst.mu_b = table_from_json(j.at("mu_b"));

  const auto delta =
      j.at("delta").get<std::vector<std::vector<std::vector<double>>>>();
  inst.loss.n_contexts = nx;
  inst.loss.n_actions = k;
  inst.loss.values.reserve(static_cast<std::size_t>(nx) * k * k);
  for (const auto& per_context : delta) {
    for (const auto& row : per_context) {
      inst.loss.values.insert(inst.loss.values.end(), row.begin(), row.end());
    }
  }

  const json& user = j.at("user");
  inst.user.bar_a_probs = table_from_json(user.at("bar_a_probs"));
  inst.user.reveal_prob = table_from_json(user.at("reveal_prob"));
  inst.user.revealing_action = require<int>(user, "revealing_action");
  if (user.contains("trigger_slack")) {
    inst.user.trigger_slack = user.at("trigger_slack").get<double>();
  }

  inst.epsilon = require<double>(j, "epsilon");
  return inst;
}

GeneratorSpec generator_spec_from_json(const json& j) {
  GeneratorSpec spec;
  const std::string kind = require<std::string>(j, "kind");
  if (kind == "lower_bound") {
    spec.kind = GeneratorKind::lower_bound;
  } else if (kind == "random") {
    spec.kind = GeneratorKind::random;
  } else if (kind == "triggered") {
    spec.kind = GeneratorKind::triggered;
  } else if (kind == "massart") {
    spec.kind = GeneratorKind::massart;
  } else if (kind == "aligned") {
    spec.kind = GeneratorKind::aligned;
  } else {
    throw ConfigError("config: unknown generator kind '" + kind + "'");
  }
  spec.n_contexts = optional_or(j, "n_contexts", spec.n_contexts);
  spec.K = optional_or(j, "K", spec.K);
  spec.n_policies = optional_or(j, "n_policies", spec.n_policies);
  spec.nu = optional_or(j, "nu", spec.nu);
  spec.tau = optional_or(j, "tau", spec.tau);
  spec.weak_margin = optional_or(j, "weak_margin", spec.weak_margin);
  spec.alpha = optional_or(j, "alpha", spec.alpha);
  spec.dfrak = optional_or(j, "dfrak", spec.dfrak);
  spec.epsilon = optional_or(j, "epsilon", spec.epsilon);
  spec.seed = optional_or<std::uint64_t>(j, "seed", spec.seed);
  if (spec.kind == GeneratorKind::lower_bound) {
    spec.lb.c = optional_or(j, "c", spec.lb.c);
    spec.lb.gamma = optional_or(j, "gamma", spec.lb.gamma);
    const std::string strat = optional_or<std::string>(j, "strategy", "S2");
    if (strat == "S1") {
      spec.lb.strategy = UserStrategy::S1;
    } else if (strat == "S2") {
      spec.lb.strategy = UserStrategy::S2;
    } else {
      throw ConfigError("config: unknown user strategy '" + strat + "'");
    }
  }
  return spec;
}

json ground_truth_to_json(const GroundTruth& gt) {
  std::vector<bool> feasible(gt.feasible.begin(), gt.feasible.end());
  return {{"exp_reward", gt.exp_reward},
          {"exp_constraint", gt.exp_constraint},
          {"constraint_min", gt.constraint_min},
          {"feasible", feasible},
          {"pi_star", gt.pi_star}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (!j.contains("instance")) {
    throw ConfigError("config: missing key 'instance'");
  }
  if (j.at("instance").is_string()) {
    cfg.instance_path = j.at("instance").get<std::string>();
  } else {
    cfg.generator = generator_spec_from_json(j.at("instance"));
  }

  const json& algo = j.contains("algo") ? j.at("algo") : json::object();
  const std::string name = optional_or<std::string>(algo, "algo", "efbo");
  if (name == "efbo") {
    cfg.algo = AlgoKind::efbo;
    cfg.efbo_cfg.T0 = optional_or<long long>(algo, "T0", 0);
    cfg.efbo_cfg.B = optional_or(algo, "B", 0.0);
    cfg.efbo_cfg.S = optional_or<long long>(algo, "S", 0);
    cfg.efbo_cfg.eta_mwu = optional_or(algo, "eta_mwu", 0.0);
    cfg.efbo_cfg.epsilon = optional_or(algo, "epsilon", -1.0);
    cfg.efbo_cfg.mu_grid =
        optional_or(algo, "mu_grid", std::vector<double>{});
  } else if (name == "corral") {
    cfg.algo = AlgoKind::corral;
    if (algo.contains("estimator")) {
      const json& est = algo.at("estimator");
      const std::string kind = require<std::string>(est, "estimator");
      if (kind == "biased") {
        cfg.estimator_cfg.kind = EstimatorKind::biased;
      } else if (kind == "doubly_robust") {
        cfg.estimator_cfg.kind = EstimatorKind::doubly_robust;
      } else if (kind == "active") {
        cfg.estimator_cfg.kind = EstimatorKind::active;
      } else {
        throw ConfigError("config: unknown estimator '" + kind + "'");
      }
      cfg.estimator_cfg.nu = optional_or(est, "nu", 0.0);
      cfg.estimator_cfg.delta_conf = optional_or(est, "delta_conf", 0.05);
      cfg.estimator_cfg.radius_scale = optional_or(est, "radius_scale", 1.0);
      cfg.estimator_cfg.budget_cap =
          optional_or<long long>(est, "budget_cap", -1);
      cfg.estimator_cfg.gamma_override = optional_or(est, "gamma", -1.0);
    }
    cfg.corral_cfg.eta0 = optional_or(algo, "eta0", 0.0);
    cfg.corral_cfg.master_floor = optional_or(algo, "master_floor", 0.0);
    cfg.corral_cfg.hedge_scale = optional_or(algo, "hedge_scale", 1.0);
    cfg.corral_cfg.master_c = optional_or(algo, "master_c", 1.0);
    cfg.corral_cfg.mu_values =
        optional_or(algo, "mu_values", std::vector<double>{});
  } else {
    throw ConfigError("config: unknown algorithm '" + name + "'");
  }

  cfg.T = require<long long>(j, "T");
  cfg.replications = optional_or(j, "replications", 1);
  cfg.seed = optional_or<std::uint64_t>(j, "seed", 0);
  cfg.out = optional_or<std::string>(j, "out", "");
  validate_config(cfg);
  return cfg;
}

json summary_to_json(const ExperimentSummary& s) {
  auto stat = [](const SummaryStat& v) {
    return json{{"mean", v.mean}, {"ci95", v.ci95}};
  };
  return {{"replications", s.replications},
          {"T", s.T},
          {"final_cum_reg_r", stat(s.final_cum_reg_r)},
          {"final_cum_reg_c", stat(s.final_cum_reg_c)},
          {"total_z", stat(s.total_z)},
          {"total_queries", stat(s.total_queries)}};
}

json tradeoff_rows_to_json(std::span<const TradeoffRow> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"variant", r.variant},
                   {"gamma", r.gamma},
                   {"reg_c_s2", r.reg_c_s2},
                   {"reg_r_worst", r.reg_r_worst},
                   {"reg_c_worst", r.reg_c_worst},
                   {"product", r.product},
                   {"regc_slope_s2", r.regc_slope_s2},
                   {"regr_rate_worst", r.regr_rate_worst}});
  }
  return out;
}

}  // namespace cbus
