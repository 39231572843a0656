#include "cbus/exp4.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cbus {

Exp4State make_exp4_state(double mu, int n_policies, int K, double eta0) {
  if (n_policies < 1 || K < 1) {
    throw std::invalid_argument("make_exp4_state: sizes must be >= 1");
  }
  Exp4State st;
  st.mu = mu;
  st.cum_loss.assign(n_policies, 0.0);
  if (eta0 > 0.0) {
    st.eta0 = eta0;
  } else {
    const double moment = mu * mu * K + (1.0 - mu) * (1.0 - mu);
    st.eta0 = std::sqrt(std::log(static_cast<double>(n_policies)) /
                        (2.0 * moment));
  }
  return st;
}

double exp4_eta(const Exp4State& state) {
  return state.eta0 / std::sqrt(static_cast<double>(state.t_internal + 1));
}

std::vector<double> exp4_distribution(const Exp4State& state,
                                      std::span<const std::uint8_t> surviving) {
  const int n = static_cast<int>(state.cum_loss.size());
  const double eta = exp4_eta(state);

  double min_loss = std::numeric_limits<double>::infinity();
  for (int p = 0; p < n; ++p) {
    if (surviving[p]) min_loss = std::min(min_loss, state.cum_loss[p]);
  }
  if (!std::isfinite(min_loss)) {
    throw std::invalid_argument("exp4_distribution: no surviving policy");
  }

  std::vector<double> q(n, 0.0);
  double norm = 0.0;
  for (int p = 0; p < n; ++p) {
    if (!surviving[p]) continue;
    q[p] = std::exp(-eta * (state.cum_loss[p] - min_loss));
    norm += q[p];
  }
  for (int p = 0; p < n; ++p) q[p] /= norm;
  return q;
}

std::vector<double> exp4_action_dist(std::span<const double> q,
                                     const PolicyClass& pc, int context) {
  std::vector<double> p(pc.n_actions(), 0.0);
  for (int pi = 0; pi < pc.n_policies(); ++pi) {
    if (q[pi] > 0.0) p[pc.action(pi, context)] += q[pi];
  }
  return p;
}

std::vector<double> exp4_loss_vector(double mu, bool z, int chosen_action,
                                     double realized_reward, double propensity,
                                     std::span<const double> bar_delta_row,
                                     const PolicyClass& pc, int context) {
  const int n = pc.n_policies();
  std::vector<double> out(n, 0.0);
  if (z) return out;
  if (propensity <= 0.0) {
    throw std::logic_error("exp4_loss_vector: chosen action has zero propensity");
  }
  const double ips = mu * (1.0 - realized_reward) / propensity;
  for (int p = 0; p < n; ++p) {
    const int a = pc.action(p, context);
    double v = (1.0 - mu) * bar_delta_row[a];
    if (a == chosen_action) v += ips;
    out[p] = v;
  }
  return out;
}

void exp4_update(Exp4State& state, std::span<const double> loss_vector,
                 bool z) {
  if (loss_vector.size() != state.cum_loss.size()) {
    throw std::invalid_argument("exp4_update: loss vector size mismatch");
  }
  if (z) return;  // frozen round: no accumulation, clock does not advance
  for (std::size_t p = 0; p < loss_vector.size(); ++p) {
    state.cum_loss[p] += loss_vector[p];
  }
  ++state.t_internal;
}

}  // namespace cbus
