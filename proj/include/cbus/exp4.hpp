#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cbus/core.hpp"

namespace cbus {

// Follow-the-regularized-leader over a shrinking policy simplex with
// entropy regularization; the closed form is a softmax of the negated
// cumulative losses restricted to survivors. The internal clock counts only
// rounds where the state actually updated — frozen rounds do not advance
// the step-size schedule eta_t = eta0 / sqrt(t).
struct Exp4State {
  double mu = 1.0;
  double eta0 = 1.0;
  long long t_internal = 0;
  std::vector<double> cum_loss;
};

// Default step-size scale sqrt(log |Pi| / (2 (mu^2 K + (1-mu)^2))) when
// eta0 <= 0.
Exp4State make_exp4_state(double mu, int n_policies, int K, double eta0 = 0.0);

// Step size for the upcoming round.
double exp4_eta(const Exp4State& state);

// Q(pi) proportional to exp(-eta_t * cum_loss(pi)) on survivors, zero
// elsewhere. Computed with the max exponent subtracted.
std::vector<double> exp4_distribution(const Exp4State& state,
                                      std::span<const std::uint8_t> surviving);

// Induced action distribution: p(a) = sum of Q over policies playing a here.
std::vector<double> exp4_action_dist(std::span<const double> q,
                                     const PolicyClass& policies, int context);

/**
 * Per-policy loss estimate for one round. Per action:
 *
 *   (1-z) * ( mu * 1(a = chosen) * (1 - reward) / propensity
 *             + (1-mu) * bar_delta_row[a] )
 *
 * mapped to policies through their action in this context. Frozen (z)
 * rounds produce the zero vector. `propensity` is the probability the
 * sampling scheme as a whole assigned to the chosen action (the mixture
 * propensity when the learner runs under a selector).
 */
std::vector<double> exp4_loss_vector(double mu, bool z, int chosen_action,
                                     double realized_reward, double propensity,
                                     std::span<const double> bar_delta_row,
                                     const PolicyClass& policies, int context);

// Accumulates the loss vector; advances the internal clock only on
// non-frozen rounds.
void exp4_update(Exp4State& state, std::span<const double> loss_vector,
                 bool z);

}  // namespace cbus
