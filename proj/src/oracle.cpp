#include "cbus/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace cbus {

double effective_mean_reward(const Instance& inst, int context, int action) {
  return (1.0 - inst.user.reveal_prob[context][action]) *
         inst.mu_b[context][action];
}

double expected_constraint_of_action(const Instance& inst, int context,
                                     int action) {
  const auto& bar = inst.user.bar_a_probs[context];
  double acc = 0.0;
  for (int b = 0; b < inst.n_actions(); ++b) {
    if (bar[b] > 0.0) acc += bar[b] * inst.loss(context, action, b);
  }
  return acc;
}

double expected_reward(const Instance& inst, int policy) {
  double acc = 0.0;
  for (int x = 0; x < inst.n_contexts(); ++x) {
    acc += inst.contexts.probs[x] *
           effective_mean_reward(inst, x, inst.policies.action(policy, x));
  }
  return acc;
}

double expected_constraint(const Instance& inst, int policy) {
  double acc = 0.0;
  for (int x = 0; x < inst.n_contexts(); ++x) {
    acc += inst.contexts.probs[x] *
           expected_constraint_of_action(inst, x,
                                         inst.policies.action(policy, x));
  }
  return acc;
}

GroundTruth solve_cbus(const Instance& inst) {
  const int n = inst.n_policies();
  if (n < 1) throw std::invalid_argument("solve_cbus: empty policy class");

  GroundTruth gt;
  gt.exp_reward.resize(n);
  gt.exp_constraint.resize(n);
  gt.feasible.assign(n, 0);
  for (int p = 0; p < n; ++p) {
    gt.exp_reward[p] = expected_reward(inst, p);
    gt.exp_constraint[p] = expected_constraint(inst, p);
  }
  gt.constraint_min = gt.exp_constraint[0];
  for (int p = 1; p < n; ++p) {
    gt.constraint_min = std::min(gt.constraint_min, gt.exp_constraint[p]);
  }
  // The minimizer itself is always feasible, so pi_star exists.
  for (int p = 0; p < n; ++p) {
    if (gt.exp_constraint[p] <= gt.constraint_min + inst.epsilon) {
      gt.feasible[p] = 1;
      if (gt.pi_star < 0 || gt.exp_reward[p] > gt.exp_reward[gt.pi_star]) {
        gt.pi_star = p;
      }
    }
  }
  return gt;
}

double similarity_d(const Instance& inst, double alpha) {
  return similarity_d(inst, alpha, [](double u) { return 1.0 - u; });
}

double similarity_d(const Instance& inst, double alpha,
                    const std::function<double(double)>& g) {
  if (alpha < 0.0) throw std::invalid_argument("similarity_d: alpha must be >= 0");
  const GroundTruth gt = solve_cbus(inst);
  const int n = inst.n_policies();

  // Per-policy expectation of the transformed dissimilarity.
  std::vector<double> g_value(n, 0.0);
  for (int p = 0; p < n; ++p) {
    double acc = 0.0;
    for (int x = 0; x < inst.n_contexts(); ++x) {
      const int a = inst.policies.action(p, x);
      const auto& bar = inst.user.bar_a_probs[x];
      double inner = 0.0;
      for (int b = 0; b < inst.n_actions(); ++b) {
        if (bar[b] > 0.0) inner += bar[b] * g(inst.loss(x, a, b));
      }
      acc += inst.contexts.probs[x] * inner;
    }
    g_value[p] = acc;
  }

  const double r_star = gt.exp_reward[gt.pi_star];
  const double g_star = g_value[gt.pi_star];
  double d = 0.0;
  for (int p = 0; p < n; ++p) {
    const double deficit = alpha * (r_star - gt.exp_reward[p]) - (g_star - g_value[p]);
    d = std::max(d, deficit);
  }
  return d;
}

RegretPair regret_step(const GroundTruth& truth, std::span<const double> q) {
  if (q.size() != truth.exp_reward.size()) {
    throw std::invalid_argument("regret_step: distribution size mismatch");
  }
  double sum = 0.0;
  for (double v : q) {
    if (v < -1e-12) throw std::invalid_argument("regret_step: negative mass");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("regret_step: distribution not normalized");
  }
  double r = 0.0, c = 0.0;
  for (std::size_t p = 0; p < q.size(); ++p) {
    r += q[p] * truth.exp_reward[p];
    c += q[p] * truth.exp_constraint[p];
  }
  return {truth.exp_reward[truth.pi_star] - r,
          c - truth.exp_constraint[truth.pi_star]};
}

TheoryBounds theory_bounds(double t0, double mu, double v, double n_policies,
                           double horizon, double alpha, double dfrak,
                           double k) {
  if (t0 < 1.0 || horizon < 1.0 || n_policies < 1.0 || k < 1.0) {
    throw std::invalid_argument("theory_bounds: sizes must be >= 1");
  }
  const double log_term = std::log(4.0 * n_policies * t0);
  const double moment = mu * mu * k + (1.0 - mu) * (1.0 - mu) * v * v;
  TheoryBounds out;
  out.v_t0 = 2.0 * std::sqrt(2.0 * t0 * moment * log_term) +
             (mu * k + (1.0 - mu)) * log_term;

  const double denom = mu + alpha * (1.0 - mu);
  if (denom == 0.0) {
    throw std::invalid_argument("theory_bounds: mu + alpha(1-mu) is zero");
  }
  out.phi = (moment * std::sqrt(horizon * std::log(n_policies) *
                                std::log(horizon)) +
             horizon * (1.0 - mu) * dfrak) /
            denom;
  return out;
}

RegretAccountant::RegretAccountant(const Instance& inst)
    : truth_(solve_cbus(inst)) {
  const int k = inst.n_actions();
  reward_by_action_.assign(k, 0.0);
  constraint_by_action_.assign(k, 0.0);
  for (int a = 0; a < k; ++a) {
    for (int x = 0; x < inst.n_contexts(); ++x) {
      reward_by_action_[a] +=
          inst.contexts.probs[x] * effective_mean_reward(inst, x, a);
      constraint_by_action_[a] +=
          inst.contexts.probs[x] * expected_constraint_of_action(inst, x, a);
    }
  }
  double ur = 0.0, uc = 0.0;
  for (int a = 0; a < k; ++a) {
    ur += reward_by_action_[a] / k;
    uc += constraint_by_action_[a] / k;
  }
  uniform_ = {truth_.exp_reward[truth_.pi_star] - ur,
              uc - truth_.exp_constraint[truth_.pi_star]};
}

RegretPair RegretAccountant::of_action(int action) const {
  return {truth_.exp_reward[truth_.pi_star] - reward_by_action_[action],
          constraint_by_action_[action] -
              truth_.exp_constraint[truth_.pi_star]};
}

RegretPair RegretAccountant::of_uniform_action() const { return uniform_; }

RegretPair RegretAccountant::of_policy_dist(std::span<const double> q) const {
  return regret_step(truth_, q);
}

}  // namespace cbus
