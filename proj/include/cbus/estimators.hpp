#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cbus/core.hpp"

namespace cbus {

// Constants an abstract constraint estimator promises per round: second
// moment bound v^2, magnitude bound b, and bias bound beta.
struct EstimatorContract {
  double v = 0.0;
  double b = 0.0;
  double beta = 0.0;
};

enum class EstimatorKind { biased, doubly_robust, active };

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::biased;
  double nu = 0.0;            // slack of withheld feedback (known to the learner)
  double delta_conf = 0.05;   // confidence parameter of the radii
  double radius_scale = 1.0;  // kappa multiplier on radii
  long long budget_cap = -1;  // reveal budget; < 0 -> ceil(T^(2/3))
  double gamma_override = -1.0;  // reveal rate; < 0 -> nu / T^(1/4)
};

// Shrinking set of plausibly-feasible policies with their running estimated
// constraint scores. Masks only ever lose members; the running score
// minimizer among survivors always survives because its own excess is zero.
struct NestedPolicySets {
  NestedPolicySets() = default;
  explicit NestedPolicySets(int n_policies)
      : surviving(n_policies, 1), cum_score(n_policies, 0.0) {}

  std::vector<std::uint8_t> surviving;
  std::vector<double> cum_score;   // sum of estimated rows at the policy's action
  long long t = 0;                 // rounds folded in
  std::vector<double> radius_log;  // radius used at each folded round

  int n_surviving() const;
  // Argmin of cum_score among survivors, lowest index on ties.
  int score_minimizer() const;
};

// Estimated dissimilarity row from one round: the true row when the
// demonstration was revealed, otherwise the row of dissimilarities to the
// played action. Under a trigger slack of nu this is pointwise within nu of
// the true row (triangle inequality).
std::vector<double> biased_delta(bool xi, int chosen_action,
                                 std::optional<int> bar_a, int context,
                                 const SurrogateLoss& loss);

// Folds one round's row and prunes survivors whose mean score exceeds the
// surviving minimum by more than epsilon + kappa * r_t, with
// r_t = 2 nu + 4 sqrt(2 log(T |Pi| / delta) / t).
void shrink_biased(NestedPolicySets& sets, const PolicyClass& policies,
                   int context, std::span<const double> row, double nu,
                   double epsilon, double delta_conf, long long horizon,
                   double kappa = 1.0);

// hat_row + z * (true_row - hat_row) / gamma. Unbiased over z ~ Ber(gamma)
// for any fixed hat_row; entries may leave [0,1] when z fires.
std::vector<double> doubly_robust_delta(
    std::span<const double> hat_row, bool z, double gamma,
    const std::optional<std::vector<double>>& true_row);

// U_t = 4 sqrt((1 v nu T^(1/4)) log(T |Pi| / delta) / t)
//       + 4 T^(1/4) log(T |Pi| / delta) / t.
double dr_radius(long long t, double delta_conf, double nu, long long horizon,
                 int n_policies);

// As shrink_biased with threshold epsilon + kappa * 4 U_t. Rows may exceed
// [0,1], so no range is assumed.
void shrink_dr(NestedPolicySets& sets, const PolicyClass& policies,
               int context, std::span<const double> row, double epsilon,
               double delta_conf, double nu, long long horizon,
               double kappa = 1.0);

// r_t = 4 sqrt(2 log(|Pi| / delta) / t) — the active-learning radius.
double active_radius(long long t, double delta_conf, int n_policies);

// True when two surviving policies disagree on this context by at least
// epsilon + r_next / 2. Scans the distinct surviving actions, so the check
// is O(|Pi| + K^2).
bool active_query(const NestedPolicySets& sets, const PolicyClass& policies,
                  const SurrogateLoss& loss, int context, double epsilon,
                  double r_next);

// Advances the round clock; on query rounds also folds the revealed row
// into the scores and prunes policies whose score exceeds the surviving
// minimum by more than (2 epsilon + 3 r_t) * t.
void active_shrink(NestedPolicySets& sets, const PolicyClass& policies,
                   int context,
                   const std::optional<std::vector<double>>& queried_row,
                   double epsilon, double delta_conf);

// Row of dissimilarities to the current score minimizer's action: the
// learning-signal proxy on non-query rounds.
std::vector<double> active_delta_proxy(const PolicyClass& policies,
                                       int pi_hat, int context,
                                       const SurrogateLoss& loss);

// Generic nested construction for any estimator satisfying a contract:
// prune when the score sum exceeds the surviving minimum by more than
// epsilon + sqrt(2 t v^2 L) + 2 b L + t beta, with L = log(T |Pi| / delta).
void generic_shrink(NestedPolicySets& sets, const PolicyClass& policies,
                    int context, std::span<const double> row,
                    const EstimatorContract& contract, double epsilon,
                    double delta_conf, long long horizon);

// False once the intentional-reveal budget is exhausted.
bool dr_budget_guard(long long t, long long z_count, long long budget_cap);

}  // namespace cbus
