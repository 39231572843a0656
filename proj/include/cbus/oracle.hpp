#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cbus/core.hpp"

namespace cbus {

// Exact solution of the constrained policy optimization problem: maximize
// expected reward subject to expected dissimilarity within epsilon of the
// class minimum. Computed by full enumeration.
struct GroundTruth {
  std::vector<double> exp_reward;      // per policy
  std::vector<double> exp_constraint;  // per policy
  double constraint_min = 0.0;
  std::vector<std::uint8_t> feasible;  // mask over the policy class
  int pi_star = -1;                    // ties broken by lowest index
};

// Mean of the observed reward for playing `action` in `context`, i.e. the
// Bernoulli mean discounted by the revelation probability (revealed rounds
// report reward 0). All regret accounting uses this effective mean so the
// oracle matches the realized reward process exactly.
double effective_mean_reward(const Instance& instance, int context, int action);

// E over the demonstration draw of loss(action, bar_a) in `context`.
double expected_constraint_of_action(const Instance& instance, int context,
                                     int action);

double expected_reward(const Instance& instance, int policy);
double expected_constraint(const Instance& instance, int policy);

GroundTruth solve_cbus(const Instance& instance);

/**
 * Smallest d >= 0 such that, for every policy pi,
 *
 *   E[g(loss) reward of pi_star] - E[g(loss) reward of pi]
 *     >= alpha * (reward regret of pi) - d,
 *
 * where the constraint-side "reward" is g applied to the dissimilarity
 * (default g(u) = 1 - u) and pi_star solves the constrained problem.
 * Exhaustive maximum over the policy class.
 */
double similarity_d(const Instance& instance, double alpha);
double similarity_d(const Instance& instance, double alpha,
                    const std::function<double(double)>& g);

struct RegretPair {
  double reg_r = 0.0;
  double reg_c = 0.0;
};

// Signed per-round pseudo-regret of a policy distribution q against the
// constrained optimum. Throws if q is not a normalized distribution.
RegretPair regret_step(const GroundTruth& truth, std::span<const double> q);

struct TheoryBounds {
  double v_t0 = 0.0;
  double phi = 0.0;
};

// Closed-form bound expressions for plotting theory curves next to
// empirical regret:
//   V_T0 = 2 sqrt(2 T0 (mu^2 K + (1-mu)^2 v^2) log(4 |Pi| T0))
//          + (mu K + (1-mu)) log(4 |Pi| T0)
//   phi  = [(mu^2 K + (1-mu)^2 v^2) sqrt(T log|Pi| log T) + T (1-mu) d]
//          / (mu + alpha (1-mu))
// Throws when mu + alpha (1-mu) == 0.
TheoryBounds theory_bounds(double t0, double mu, double v, double n_policies,
                           double horizon, double alpha, double dfrak,
                           double k);

// Precomputed tables for exact per-round regret accounting. The marginal
// tables fold the context distribution, so a round's regret is O(1) for a
// fixed action and O(|Pi|) for a policy distribution.
class RegretAccountant {
 public:
  explicit RegretAccountant(const Instance& instance);

  const GroundTruth& truth() const { return truth_; }
  RegretPair of_action(int action) const;  // point mass on a fixed action
  RegretPair of_uniform_action() const;
  RegretPair of_policy_dist(std::span<const double> q) const;

 private:
  GroundTruth truth_;
  std::vector<double> reward_by_action_;      // marginal effective reward
  std::vector<double> constraint_by_action_;  // marginal expected loss
  RegretPair uniform_;
};

}  // namespace cbus
