#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cbus/corral.hpp"
#include "cbus/efbo.hpp"
#include "cbus/envs.hpp"
#include "cbus/trajectory.hpp"

namespace cbus {

// Raised on malformed configuration; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AlgoKind { efbo, corral };

struct ExperimentConfig {
  std::optional<GeneratorSpec> generator;  // exclusive with instance_path
  std::string instance_path;
  AlgoKind algo = AlgoKind::efbo;
  EfboConfig efbo_cfg;
  EstimatorConfig estimator_cfg;
  CorralConfig corral_cfg;
  long long T = 0;       // >= 8
  int replications = 1;  // >= 1
  std::uint64_t seed = 0;
  std::string out;  // output directory; empty -> no files written
};

void validate_config(const ExperimentConfig& cfg);

// Fixed column order; floats at 9 significant digits so replays diff clean.
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);
Trajectory read_trajectory_csv(std::istream& is);

struct SummaryStat {
  double mean = 0.0;
  double ci95 = 0.0;  // 1.96 * standard error
};

struct ExperimentSummary {
  int replications = 0;
  long long T = 0;
  SummaryStat final_cum_reg_r;
  SummaryStat final_cum_reg_c;
  SummaryStat total_z;
  SummaryStat total_queries;
};

ExperimentSummary summarize(std::span<const Trajectory> trajectories,
                            long long T);

// Runs all replications (replication i is seeded with config seed + i),
// writes one CSV per replication plus summary.json when an output directory
// is configured, and returns the summary. Replications run in parallel up
// to the CBUS_THREADS cap; results merge by replication index so the output
// does not depend on scheduling.
ExperimentSummary run_experiment(const ExperimentConfig& cfg,
                                 std::vector<Trajectory>* out_trajectories = nullptr);

// Builds the instance a config describes (generator or file).
Instance load_instance(const ExperimentConfig& cfg);

// Runs the configured algorithm once against a prepared instance.
Trajectory run_single(const Instance& instance, const ExperimentConfig& cfg,
                      std::uint64_t seed);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

// Least squares on (log x, log y). Throws on fewer than 3 points or
// non-positive values.
FitResult fit_scaling_exponent(std::span<const std::pair<double, double>> points);

// Plain least-squares slope of y against x (used for linear-growth checks).
double linear_slope(std::span<const std::pair<double, double>> points);

// A frontier entry of the reward/fidelity trade-off sweep.
struct TradeoffRow {
  std::string variant;
  double gamma = 0.0;
  double reg_c_s2 = 0.0;        // mean final fidelity regret under S2
  double reg_r_worst = 0.0;     // mean final reward regret under the worse strategy
  double reg_c_worst = 0.0;     // max over strategies of mean final fidelity regret
  double product = 0.0;         // reg_r_worst * sqrt(max(reg_c_s2, 0))
  double regc_slope_s2 = 0.0;   // linear slope of mean cumulative fidelity regret under S2
  double regr_rate_worst = 0.0; // reg_r_worst / T
};

struct TradeoffVariant {
  std::string name;
  enum Kind { never_probe, commit_pi2, efbo } kind = efbo;
  long long t0 = 0;  // exploration budget where applicable
};

std::vector<TradeoffVariant> default_tradeoff_variants(long long T);

// Runs every variant on the two-policy hard family under both user
// strategies for each gamma, averaging over replications.
std::vector<TradeoffRow> tradeoff_sweep(std::span<const double> gamma_grid,
                                        double c, long long T,
                                        std::span<const TradeoffVariant> variants,
                                        int replications, std::uint64_t seed);

// Replication-level parallelism helper: runs fn(0..n-1) on up to
// CBUS_THREADS workers (hardware concurrency by default).
void parallel_for(int n, const std::function<void(int)>& fn);
int thread_cap();

}  // namespace cbus
