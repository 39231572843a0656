#pragma once

#include <map>
#include <span>
#include <vector>

#include "cbus/core.hpp"
#include "cbus/trajectory.hpp"

namespace cbus {

// Explore-first with blended commit: four exploration quarters, a per-blend
// saddle-point solve of the empirical constrained objective, blend selection
// on held-out rewards, then commit.
struct EfboConfig {
  long long T0 = 0;        // 0 -> ceil(T^(2/3))
  double B = 0.0;          // dual cap; 0 -> T / T0
  long long S = 0;         // saddle iterations; 0 -> ceil(B * T0)
  double eta_mwu = 0.0;    // dual step size; 0 -> sqrt(1 / (S * B))
  double epsilon = -1.0;   // feasibility tolerance; < 0 -> instance epsilon
  std::vector<double> mu_grid;  // empty -> mu_grid(T, K)
};

// Fills the zero/negative fields with their defaults for horizon T and
// action count K; throws if 4*T0 > T.
EfboConfig resolve_efbo_config(EfboConfig cfg, long long T, int K,
                               double instance_epsilon);

struct RewardSample {
  int context = 0;
  int action = 0;
  double reward = 0.0;
};
struct DeltaSample {
  int context = 0;
  std::vector<double> row;  // loss(a, demonstrated action) for every a
};

// The four exploration quarters, in protocol order: uniform rewards,
// two revealing batches, then a second uniform reward batch reserved for
// blend selection.
struct ExplorationLog {
  std::vector<RewardSample> reward_batch_1;
  std::vector<DeltaSample> delta_batch_1;
  std::vector<DeltaSample> delta_batch_2;
  std::vector<RewardSample> reward_batch_2;
};

// Geometric blend grid {1 - 2^-n} and {1/K + 2^-n} for n up to log2(T),
// restricted to (0,1), deduplicated and sorted.
std::vector<double> mu_grid(long long T, int K);

// Importance-weighted reward estimate from a uniform-exploration batch:
// (K / T0) * sum_t reward_t * 1(action_t = policy(context_t)).
double ips_reward_estimate(std::span<const RewardSample> batch,
                           const PolicyClass& policies, int policy, int K);

// Mean dissimilarity of `policy` on the batch minus the class minimum
// (inner minimum by enumeration). Nonnegative.
double empirical_constraint_regret(std::span<const DeltaSample> batch,
                                   const PolicyClass& policies, int policy);

// mu-blended objective: mu * IPS reward + (1 - mu) * mean of (1 - loss)
// over the second revealing batch.
double blended_reward(const ExplorationLog& log, const PolicyClass& policies,
                      int policy, double mu, int K);

// Empirical Lagrangian: blended reward minus lambda times the constraint
// violation (constraint regret minus epsilon), extended linearly to a
// distribution q over policies.
double lagrangian(std::span<const double> q, double lambda, double mu,
                  const ExplorationLog& log, const PolicyClass& policies,
                  double epsilon);

// Point mass on the policy maximizing the Lagrangian at fixed lambda; ties
// go to the lowest index. (epsilon shifts the objective by a constant, so
// it does not appear here.)
std::vector<double> best_response(double lambda, double mu,
                                  const ExplorationLog& log,
                                  const PolicyClass& policies);

// Exponentiated-gradient step for the dual: min(lambda * exp(eta *
// violation), B).
double mwu_update(double lambda, double violation, double eta, double B);

struct SaddleDiagnostics {
  double duality_gap = 0.0;
  std::vector<double> lambda_trace;  // lambda_1 .. lambda_S
};
struct SaddleResult {
  std::vector<double> q;  // averaged primal iterates
  SaddleDiagnostics diag;
};

// Alternates best responses for the policy player with dual multiplicative
// updates for S iterations and returns the averaged primal distribution.
// Deterministic given the log.
SaddleResult saddle_solve(double mu, const ExplorationLog& log,
                          const PolicyClass& policies, const EfboConfig& cfg);

// Picks the blend whose solution scores highest against the held-out
// importance-weighted rewards; ties go to the smaller mu.
double select_mu(const std::map<double, std::vector<double>>& candidates,
                 std::span<const RewardSample> held_out_batch,
                 const PolicyClass& policies, int K);

Trajectory run_efbo(const Instance& instance, EfboConfig cfg, long long T,
                    SplitMix64& rng);

// Minimax bound expression minimized by the blend grid:
//   (T^(2/3) sqrt((mu^2 K + (1-mu)^2) log(|Pi| T)) + T (1-mu) d)
//   / (mu + alpha (1-mu)).
// Used to check grid adequacy against a fine grid.
double blend_bound_expression(double mu, long long T, int K,
                              double n_policies, double alpha, double dfrak);

}  // namespace cbus
