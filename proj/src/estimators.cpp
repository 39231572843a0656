#include "cbus/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cbus {

namespace {

// Accumulates the round's row into every policy's score and removes
// survivors whose score exceeds the surviving minimum by more than
// `allowance` (all in score-sum units).
void fold_and_prune(NestedPolicySets& sets, const PolicyClass& pc,
                    int context, std::span<const double> row,
                    double allowance, double radius) {
  const int n = pc.n_policies();
  for (int p = 0; p < n; ++p) {
    sets.cum_score[p] += row[pc.action(p, context)];
  }
  sets.radius_log.push_back(radius);

  double min_score = std::numeric_limits<double>::infinity();
  for (int p = 0; p < n; ++p) {
    if (sets.surviving[p]) min_score = std::min(min_score, sets.cum_score[p]);
  }
  const double cutoff = min_score + allowance;
  for (int p = 0; p < n; ++p) {
    if (sets.surviving[p] && sets.cum_score[p] > cutoff) sets.surviving[p] = 0;
  }
}

}  // namespace

int NestedPolicySets::n_surviving() const {
  int n = 0;
  for (auto s : surviving) n += s;
  return n;
}

int NestedPolicySets::score_minimizer() const {
  int best = -1;
  for (std::size_t p = 0; p < surviving.size(); ++p) {
    if (!surviving[p]) continue;
    if (best < 0 || cum_score[p] < cum_score[best]) best = static_cast<int>(p);
  }
  return best;
}

std::vector<double> biased_delta(bool xi, int chosen_action,
                                 std::optional<int> bar_a, int context,
                                 const SurrogateLoss& loss) {
  if (xi && !bar_a) {
    throw std::invalid_argument(
        "biased_delta: revealed round without a demonstration");
  }
  const int ref = xi ? *bar_a : chosen_action;
  auto row = loss.row_given(context, ref);
  return {row.begin(), row.end()};
}

void shrink_biased(NestedPolicySets& sets, const PolicyClass& pc, int context,
                   std::span<const double> row, double nu, double epsilon,
                   double delta_conf, long long horizon, double kappa) {
  ++sets.t;
  const double t = static_cast<double>(sets.t);
  const double log_term =
      std::log(static_cast<double>(horizon) * pc.n_policies() / delta_conf);
  const double radius = 2.0 * nu + 4.0 * std::sqrt(2.0 * log_term / t);
  fold_and_prune(sets, pc, context, row, (epsilon + kappa * radius) * t,
                 radius);
}

std::vector<double> doubly_robust_delta(
    std::span<const double> hat_row, bool z, double gamma,
    const std::optional<std::vector<double>>& true_row) {
  std::vector<double> out(hat_row.begin(), hat_row.end());
  if (!z) return out;
  if (!true_row) {
    throw std::invalid_argument("doubly_robust_delta: z round without the true row");
  }
  if (gamma <= 0.0) {
    throw std::invalid_argument("doubly_robust_delta: z round with gamma = 0");
  }
  for (std::size_t a = 0; a < out.size(); ++a) {
    out[a] += ((*true_row)[a] - out[a]) / gamma;
  }
  return out;
}

double dr_radius(long long t, double delta_conf, double nu, long long horizon,
                 int n_policies) {
  if (t < 1) throw std::invalid_argument("dr_radius: t must be >= 1");
  const double log_term =
      std::log(static_cast<double>(horizon) * n_policies / delta_conf);
  const double t4 = std::pow(static_cast<double>(horizon), 0.25);
  const double lead = std::max(1.0, nu * t4);
  return 4.0 * std::sqrt(lead * log_term / t) + 4.0 * t4 * log_term / t;
}

void shrink_dr(NestedPolicySets& sets, const PolicyClass& pc, int context,
               std::span<const double> row, double epsilon, double delta_conf,
               double nu, long long horizon, double kappa) {
  ++sets.t;
  const double radius =
      4.0 * dr_radius(sets.t, delta_conf, nu, horizon, pc.n_policies());
  fold_and_prune(sets, pc, context, row,
                 (epsilon + kappa * radius) * static_cast<double>(sets.t),
                 radius);
}

double active_radius(long long t, double delta_conf, int n_policies) {
  if (t < 1) throw std::invalid_argument("active_radius: t must be >= 1");
  return 4.0 * std::sqrt(2.0 * std::log(n_policies / delta_conf) /
                         static_cast<double>(t));
}

bool active_query(const NestedPolicySets& sets, const PolicyClass& pc,
                  const SurrogateLoss& loss, int context, double epsilon,
                  double r_next) {
  const double threshold = epsilon + r_next / 2.0;
  // Collect the distinct actions survivors take here, then test pairs.
  std::vector<std::uint8_t> used(pc.n_actions(), 0);
  for (int p = 0; p < pc.n_policies(); ++p) {
    if (sets.surviving[p]) used[pc.action(p, context)] = 1;
  }
  for (int a = 0; a < pc.n_actions(); ++a) {
    if (!used[a]) continue;
    for (int b = a + 1; b < pc.n_actions(); ++b) {
      if (used[b] && loss(context, a, b) >= threshold) return true;
    }
  }
  return false;
}

void active_shrink(NestedPolicySets& sets, const PolicyClass& pc, int context,
                   const std::optional<std::vector<double>>& queried_row,
                   double epsilon, double delta_conf) {
  ++sets.t;
  const double radius = active_radius(sets.t, delta_conf, pc.n_policies());
  sets.radius_log.push_back(radius);
  if (!queried_row) return;  // scores accumulate on query rounds only
  const int n = pc.n_policies();
  for (int p = 0; p < n; ++p) {
    sets.cum_score[p] += (*queried_row)[pc.action(p, context)];
  }
  double min_score = std::numeric_limits<double>::infinity();
  for (int p = 0; p < n; ++p) {
    if (sets.surviving[p]) min_score = std::min(min_score, sets.cum_score[p]);
  }
  const double cutoff =
      min_score + (2.0 * epsilon + 3.0 * radius) * static_cast<double>(sets.t);
  for (int p = 0; p < n; ++p) {
    if (sets.surviving[p] && sets.cum_score[p] > cutoff) sets.surviving[p] = 0;
  }
}

std::vector<double> active_delta_proxy(const PolicyClass& pc, int pi_hat,
                                       int context,
                                       const SurrogateLoss& loss) {
  auto row = loss.row_given(context, pc.action(pi_hat, context));
  return {row.begin(), row.end()};
}

void generic_shrink(NestedPolicySets& sets, const PolicyClass& pc,
                    int context, std::span<const double> row,
                    const EstimatorContract& contract, double epsilon,
                    double delta_conf, long long horizon) {
  ++sets.t;
  const double t = static_cast<double>(sets.t);
  const double log_term =
      std::log(static_cast<double>(horizon) * pc.n_policies() / delta_conf);
  const double radius =
      std::sqrt(2.0 * t * contract.v * contract.v * log_term) +
      2.0 * contract.b * log_term + t * contract.beta;
  fold_and_prune(sets, pc, context, row, epsilon + radius, radius);
}

bool dr_budget_guard(long long /*t*/, long long z_count,
                     long long budget_cap) {
  return z_count < budget_cap;
}

}  // namespace cbus
