#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cbus/harness.hpp"
#include "cbus/json_io.hpp"
#include "cbus/oracle.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitCheckFailed = 3;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cbus::ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw cbus::ConfigError(path + ": " + e.what());
  }
}

// Accepts plain integers or "2^k".
long long parse_horizon(const std::string& token) {
  const auto caret = token.find('^');
  if (caret == std::string::npos) return std::stoll(token);
  const long long base = std::stoll(token.substr(0, caret));
  const long long exp = std::stoll(token.substr(caret + 1));
  long long v = 1;
  for (long long i = 0; i < exp; ++i) v *= base;
  return v;
}

double final_column(const cbus::Trajectory& traj, const std::string& column) {
  if (traj.rows.empty()) throw cbus::ConfigError("empty trajectory");
  if (column == "cum_reg_r") return traj.rows.back().cum_reg_r;
  if (column == "cum_reg_c") return traj.rows.back().cum_reg_c;
  throw cbus::ConfigError("unknown column '" + column + "'");
}

std::vector<cbus::TradeoffVariant> variants_from_json(
    const nlohmann::json& j, long long T) {
  if (!j.contains("variants")) return cbus::default_tradeoff_variants(T);
  std::vector<cbus::TradeoffVariant> out;
  for (const auto& v : j.at("variants")) {
    cbus::TradeoffVariant var;
    const std::string kind = v.at("kind").get<std::string>();
    if (kind == "never_probe") {
      var.kind = cbus::TradeoffVariant::never_probe;
    } else if (kind == "commit_pi2") {
      var.kind = cbus::TradeoffVariant::commit_pi2;
    } else if (kind == "efbo") {
      var.kind = cbus::TradeoffVariant::efbo;
    } else {
      throw cbus::ConfigError("unknown tradeoff variant '" + kind + "'");
    }
    var.t0 = v.value("t0", 0LL);
    var.name = v.value("name", kind);
    out.push_back(var);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation laboratory for contextual bandits with "
               "user-triggered supervision"};
  app.require_subcommand(1);

  std::string config_path, instance_path, column = "cum_reg_r";
  std::vector<std::string> horizon_tokens, csv_paths;
  bool check = false;
  double check_min = 0.0, check_max = 1.0;

  auto* run_cmd = app.add_subcommand("run", "Run a configured experiment");
  run_cmd->add_option("config", config_path, "experiment config JSON")
      ->required();

  auto* sweep_cmd =
      app.add_subcommand("sweep", "Run a config over a grid of horizons");
  sweep_cmd->add_option("config", config_path)->required();
  sweep_cmd
      ->add_option("--horizons", horizon_tokens,
                   "horizons, e.g. 2^11 2^12 4096")
      ->required()
      ->expected(-1);
  sweep_cmd->add_option("--column", column, "cum_reg_r or cum_reg_c");
  sweep_cmd->add_flag("--check", check, "exit 3 if the fitted slope is outside [min,max]");
  sweep_cmd->add_option("--min", check_min, "slope lower bound for --check");
  sweep_cmd->add_option("--max", check_max, "slope upper bound for --check");

  auto* validate_cmd =
      app.add_subcommand("validate", "Check an instance file's invariants");
  validate_cmd->add_option("instance", instance_path)->required();

  auto* oracle_cmd =
      app.add_subcommand("oracle", "Print the exact ground truth of an instance");
  oracle_cmd->add_option("instance", instance_path)->required();

  auto* fit_cmd = app.add_subcommand(
      "fit", "Fit a scaling exponent to trajectory CSVs (one horizon each)");
  fit_cmd->add_option("csv", csv_paths)->required()->expected(-1);
  fit_cmd->add_option("--column", column, "cum_reg_r or cum_reg_c");
  fit_cmd->add_flag("--check", check, "exit 3 if the slope is outside [min,max]");
  fit_cmd->add_option("--min", check_min, "slope lower bound for --check");
  fit_cmd->add_option("--max", check_max, "slope upper bound for --check");

  auto* tradeoff_cmd = app.add_subcommand(
      "tradeoff", "Sweep the reward/fidelity trade-off frontier");
  tradeoff_cmd->add_option("config", config_path)->required();

  std::string gen_out;
  auto* gen_cmd = app.add_subcommand(
      "gen", "Generate an instance file from a generator spec");
  gen_cmd->add_option("spec", config_path, "generator spec JSON")->required();
  gen_cmd->add_option("-o,--out", gen_out, "output instance path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const auto cfg = cbus::experiment_config_from_json(load_json(config_path));
      const auto summary = cbus::run_experiment(cfg);
      std::cout << cbus::summary_to_json(summary).dump(2) << '\n';
      return 0;
    }

    if (sweep_cmd->parsed()) {
      auto base = cbus::experiment_config_from_json(load_json(config_path));
      nlohmann::json per_horizon = nlohmann::json::array();
      std::vector<std::pair<double, double>> points;
      for (const auto& token : horizon_tokens) {
        auto cfg = base;
        cfg.T = parse_horizon(token);
        if (!base.out.empty()) {
          cfg.out = base.out + "/T_" + std::to_string(cfg.T);
        }
        std::vector<cbus::Trajectory> trajs;
        const auto summary = cbus::run_experiment(cfg, &trajs);
        double mean = 0.0;
        for (const auto& t : trajs) mean += final_column(t, column);
        mean /= static_cast<double>(trajs.size());
        points.emplace_back(static_cast<double>(cfg.T), mean);
        nlohmann::json entry = cbus::summary_to_json(summary);
        entry["mean_" + column] = mean;
        per_horizon.push_back(entry);
      }
      nlohmann::json out = {{"per_horizon", per_horizon}};
      bool fit_ok = true;
      try {
        const auto fit = cbus::fit_scaling_exponent(points);
        out["fit"] = {{"column", column},
                      {"slope", fit.slope},
                      {"intercept", fit.intercept},
                      {"r2", fit.r2}};
        fit_ok = !check || (fit.slope >= check_min && fit.slope <= check_max);
      } catch (const std::invalid_argument& e) {
        out["fit"] = {{"error", e.what()}};
        fit_ok = !check;
      }
      std::cout << out.dump(2) << '\n';
      return fit_ok ? 0 : kExitCheckFailed;
    }

    if (validate_cmd->parsed()) {
      const auto inst = cbus::instance_from_json(load_json(instance_path));
      const auto violations = cbus::validate_instance(inst);
      std::cout << nlohmann::json(violations).dump(2) << '\n';
      return 0;
    }

    if (oracle_cmd->parsed()) {
      const auto inst = cbus::instance_from_json(load_json(instance_path));
      std::cout << cbus::ground_truth_to_json(cbus::solve_cbus(inst)).dump(2)
                << '\n';
      return 0;
    }

    if (fit_cmd->parsed()) {
      std::vector<std::pair<double, double>> points;
      for (const auto& path : csv_paths) {
        std::ifstream in(path);
        if (!in) throw cbus::ConfigError("cannot open " + path);
        const auto traj = cbus::read_trajectory_csv(in);
        points.emplace_back(static_cast<double>(traj.rows.back().t),
                            final_column(traj, column));
      }
      const auto fit = cbus::fit_scaling_exponent(points);
      std::cout << nlohmann::json{{"column", column},
                                  {"slope", fit.slope},
                                  {"intercept", fit.intercept},
                                  {"r2", fit.r2}}
                       .dump(2)
                << '\n';
      if (check && (fit.slope < check_min || fit.slope > check_max)) {
        return kExitCheckFailed;
      }
      return 0;
    }

    if (tradeoff_cmd->parsed()) {
      const auto j = load_json(config_path);
      const auto grid = j.at("gamma_grid").get<std::vector<double>>();
      const double c = j.value("c", 0.25);
      const long long T = j.at("T").get<long long>();
      const int reps = j.value("replications", 8);
      const std::uint64_t seed = j.value("seed", 0ULL);
      const auto variants = variants_from_json(j, T);
      const auto rows = cbus::tradeoff_sweep(grid, c, T, variants, reps, seed);
      const auto out_json = cbus::tradeoff_rows_to_json(rows);
      std::cout << out_json.dump(2) << '\n';
      if (j.contains("out")) {
        const std::string dir = j.at("out").get<std::string>();
        std::filesystem::create_directories(dir);
        std::ofstream os(dir + "/tradeoff.json");
        os << out_json.dump(2) << '\n';
      }
      return 0;
    }

    if (gen_cmd->parsed()) {
      const auto spec = cbus::generator_spec_from_json(load_json(config_path));
      const auto inst = cbus::make_instance(spec);
      std::ofstream os(gen_out);
      if (!os) throw cbus::ConfigError("cannot write " + gen_out);
      os << cbus::instance_to_json(inst).dump(2) << '\n';
      return 0;
    }
  } catch (const cbus::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
