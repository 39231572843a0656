#pragma once

#include <vector>

#include "cbus/core.hpp"
#include "cbus/estimators.hpp"
#include "cbus/exp4.hpp"
#include "cbus/oracle.hpp"
#include "cbus/trajectory.hpp"

namespace cbus {

// Master configuration: one Exp4 base per blend weight, combined by a
// 1/2-Tsallis FTRL master with importance-weighted losses, per-base hedging
// offsets scaled by sqrt(C_m / C), and a mixing floor on the weights.
struct CorralConfig {
  std::vector<double> mu_values;  // empty -> mu_grid(T, K)
  double eta0 = 0.0;              // base step-size scale; 0 -> per-base default
  double master_floor = 0.0;      // 0 -> 1 / (2 M T)
  double hedge_scale = 1.0;       // multiplier on the hedging offsets
  double master_c = 1.0;          // C in the master step size sqrt(M / (C t))
};

struct CorralState {
  CorralConfig cfg;
  EstimatorConfig est;
  long long horizon = 0;
  std::vector<double> mu_values;
  std::vector<double> stability;       // C_m = mu_m^2 K + (1 - mu_m)^2
  std::vector<Exp4State> bases;
  std::vector<double> master_cum;      // master's cumulative loss estimates
  std::vector<double> master_weights;  // current floored weights
  long long master_rounds = 0;         // non-frozen rounds processed
  NestedPolicySets sets;
  long long z_count = 0;
  long long queries = 0;
  int pi_hat = 0;       // active strategy's running score minimizer
  double gamma = 0.0;   // intentional-reveal rate (doubly robust)
  long long budget_cap = 0;
};

struct CorralRoundResult {
  Feedback fb;
  RegretPair reg;
  int base = -1;    // selected base, -1 on frozen rounds
  double mu = 0.0;  // blend of the selected base
};

CorralState init_corral(const Instance& instance, EstimatorConfig est,
                        CorralConfig cfg, long long T);

/**
 * One master round. The estimator decides whether to spend the round on the
 * revealing action (frozen round: bases and master untouched, the revealed
 * row feeds the policy sets); otherwise a base is drawn from the master
 * weights and its policy plays. The action-level loss estimate — built with
 * the propensity of the played action under the whole mixture — is shared
 * by every base, the master updates on its arm-level importance-weighted
 * loss, and the sets shrink with the round's estimated row.
 *
 * Draw order: context, reveal decision (doubly robust only), master arm
 * (when M > 1), policy, environment.
 */
CorralRoundResult corral_round(CorralState& state, const Instance& instance,
                               const RegretAccountant& accountant,
                               long long t, SplitMix64& rng);

// Optional diagnostics for tests.
struct CorralProbe {
  double min_master_weight = 1.0;
  std::vector<long long> base_internal_rounds;
  std::vector<double> final_master_weights;
  int final_surviving = 0;
};

Trajectory run_corral(const Instance& instance, const EstimatorConfig& est,
                      const CorralConfig& cfg, long long T, SplitMix64& rng,
                      CorralProbe* probe = nullptr);

// Weights of FTRL with the 1/2-Tsallis regularizer: p_i proportional to
// (eta (L_i + lam))^(-2) with lam normalizing the simplex. Solved by
// bisection; exposed for tests.
std::vector<double> tsallis_weights(std::span<const double> cum_loss,
                                    double eta);

}  // namespace cbus
