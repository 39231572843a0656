#include "cbus/corral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cbus/efbo.hpp"

namespace cbus {

namespace {

// Per-round hedging offset for base m at master round tau: the marginal
// regret a sqrt(C_m t log|Pi|)-regret base is expected to add.
double hedge_offset(double c_m, double c, double hedge_scale,
                    double log_n_policies, long long tau) {
  return hedge_scale * std::sqrt(c_m / c) * 0.5 *
         std::sqrt(log_n_policies / static_cast<double>(tau));
}

void refresh_master_weights(CorralState& s) {
  const int m = static_cast<int>(s.mu_values.size());
  if (m == 1) {
    s.master_weights = {1.0};
    return;
  }
  const double eta = std::sqrt(
      m / (s.cfg.master_c * static_cast<double>(s.master_rounds + 1)));
  std::vector<double> raw = tsallis_weights(s.master_cum, eta);
  const double floor = s.cfg.master_floor;
  for (int j = 0; j < m; ++j) {
    s.master_weights[j] = (1.0 - m * floor) * raw[j] + floor;
  }
}

}  // namespace

std::vector<double> tsallis_weights(std::span<const double> cum_loss,
                                    double eta) {
  const int m = static_cast<int>(cum_loss.size());
  if (m == 1) return {1.0};
  const double l_min = *std::min_element(cum_loss.begin(), cum_loss.end());
  // p_i(lam) = (eta (L_i + lam))^(-2) is decreasing in lam; the normalizer
  // lies in (-l_min, -l_min + sqrt(m)/eta].
  double lo = -l_min;
  double hi = -l_min + std::sqrt(static_cast<double>(m)) / eta;
  for (int iter = 0; iter < 200; ++iter) {
    const double lam = 0.5 * (lo + hi);
    double sum = 0.0;
    for (double l : cum_loss) {
      const double d = eta * (l + lam);
      sum += 1.0 / (d * d);
    }
    (sum > 1.0 ? lo : hi) = lam;
    if (hi - lo < 1e-14 * (1.0 + std::fabs(hi))) break;
  }
  const double lam = 0.5 * (lo + hi);
  std::vector<double> p(m);
  double norm = 0.0;
  for (int j = 0; j < m; ++j) {
    const double d = eta * (cum_loss[j] + lam);
    p[j] = 1.0 / (d * d);
    norm += p[j];
  }
  for (double& v : p) v /= norm;
  return p;
}

CorralState init_corral(const Instance& inst, EstimatorConfig est,
                        CorralConfig cfg, long long T) {
  if (T < 1) throw std::invalid_argument("corral: horizon must be >= 1");
  const int k = inst.n_actions();
  const int n_pol = inst.n_policies();

  if (cfg.mu_values.empty()) cfg.mu_values = mu_grid(std::max<long long>(T, 2), k);
  const int m = static_cast<int>(cfg.mu_values.size());
  if (cfg.master_floor <= 0.0) {
    cfg.master_floor = 1.0 / (2.0 * m * static_cast<double>(T));
  }
  if (m * cfg.master_floor >= 1.0) {
    throw std::invalid_argument("corral: master floor too large");
  }

  CorralState s;
  s.cfg = std::move(cfg);
  s.est = est;
  s.horizon = T;
  s.mu_values = s.cfg.mu_values;
  s.sets = NestedPolicySets(n_pol);
  s.stability.reserve(m);
  s.bases.reserve(m);
  for (double mu : s.mu_values) {
    s.stability.push_back(mu * mu * k + (1.0 - mu) * (1.0 - mu));
    s.bases.push_back(make_exp4_state(mu, n_pol, k, cfg.eta0));
  }
  s.master_cum.assign(m, 0.0);
  s.master_weights.assign(m, 1.0 / m);
  s.pi_hat = s.sets.score_minimizer();
  s.budget_cap = est.budget_cap >= 0
                     ? est.budget_cap
                     : static_cast<long long>(std::ceil(
                           std::pow(static_cast<double>(T), 2.0 / 3.0)));
  if (est.kind == EstimatorKind::doubly_robust) {
    s.gamma = est.gamma_override >= 0.0
                  ? est.gamma_override
                  : est.nu / std::pow(static_cast<double>(T), 0.25);
  }
  return s;
}

CorralRoundResult corral_round(CorralState& s, const Instance& inst,
                               const RegretAccountant& acct, long long t,
                               SplitMix64& rng) {
  const PolicyClass& pc = inst.policies;
  const int m = static_cast<int>(s.mu_values.size());
  const int a0 = inst.user.revealing_action;
  const double eps = inst.epsilon;

  const int x = rng.categorical(inst.contexts.probs);

  bool z = false;
  if (s.est.kind == EstimatorKind::doubly_robust) {
    if (s.gamma > 0.0 && dr_budget_guard(t, s.z_count, s.budget_cap)) {
      z = rng.bernoulli(s.gamma);
    }
  } else if (s.est.kind == EstimatorKind::active) {
    const double r_next =
        active_radius(s.sets.t + 1, s.est.delta_conf, pc.n_policies());
    z = active_query(s.sets, pc, inst.loss, x, eps, r_next);
  }

  if (z) {
    // Frozen round: play the revealing action, feed the exact row to the
    // sets, leave every base and the master untouched.
    const Feedback fb = env_step(inst, x, a0, true, rng);
    ++s.z_count;
    if (s.est.kind == EstimatorKind::doubly_robust) {
      // hat row and true row coincide here, so the amplified correction
      // cancels and the exact row is what feeds the scores.
      shrink_dr(s.sets, pc, x, *fb.delta_row, eps, s.est.delta_conf, s.est.nu,
                s.horizon, s.est.radius_scale);
    } else {
      ++s.queries;
      active_shrink(s.sets, pc, x, fb.delta_row, eps, s.est.delta_conf);
      s.pi_hat = s.sets.score_minimizer();
    }
    return {fb, acct.of_action(a0), -1, 0.0};
  }

  // Distributions all bases would play this round; also the exact mixture
  // the master induces, for sampling propensities and regret accounting.
  std::vector<std::vector<double>> q(m);
  for (int j = 0; j < m; ++j) {
    q[j] = exp4_distribution(s.bases[j], s.sets.surviving);
  }

  const std::vector<double> weights_used = s.master_weights;
  const int chosen = m > 1 ? rng.categorical(weights_used) : 0;
  const int pi = rng.categorical(q[chosen]);
  const int a = pc.action(pi, x);
  const Feedback fb = env_step(inst, x, a, false, rng);

  // Propensity of the played action under the whole system. The action-level
  // loss estimate does not depend on which base proposed the action, so
  // every base consumes it at full rate — only the master needs the
  // arm-level importance weight.
  double propensity = 0.0;
  for (int j = 0; j < m; ++j) {
    const double w = m > 1 ? weights_used[j] : 1.0;
    for (int p = 0; p < pc.n_policies(); ++p) {
      if (pc.action(p, x) == a) propensity += w * q[j][p];
    }
  }

  std::vector<double> row =
      s.est.kind == EstimatorKind::active
          ? active_delta_proxy(pc, s.pi_hat, x, inst.loss)
          : biased_delta(fb.xi, a, fb.bar_a, x, inst.loss);

  for (int j = 0; j < m; ++j) {
    const std::vector<double> loss_vec = exp4_loss_vector(
        s.mu_values[j], false, a, fb.reward, propensity, row, pc, x);
    exp4_update(s.bases[j], loss_vec, false);
  }

  ++s.master_rounds;
  if (m > 1) {
    s.master_cum[chosen] += (1.0 - fb.reward) / weights_used[chosen];
    const double log_np = std::log(static_cast<double>(pc.n_policies()));
    for (int j = 0; j < m; ++j) {
      s.master_cum[j] += hedge_offset(s.stability[j], s.cfg.master_c,
                                      s.cfg.hedge_scale, log_np,
                                      s.master_rounds);
    }
    refresh_master_weights(s);
  }

  switch (s.est.kind) {
    case EstimatorKind::biased:
      shrink_biased(s.sets, pc, x, row, s.est.nu, eps, s.est.delta_conf,
                    s.horizon, s.est.radius_scale);
      break;
    case EstimatorKind::doubly_robust:
      shrink_dr(s.sets, pc, x, row, eps, s.est.delta_conf, s.est.nu,
                s.horizon, s.est.radius_scale);
      break;
    case EstimatorKind::active:
      // Clock only: scores accumulate on query rounds, nothing is pruned.
      active_shrink(s.sets, pc, x, std::nullopt, eps, s.est.delta_conf);
      break;
  }

  // Exact regret of the played mixture (with the weights used to sample).
  std::vector<double> mix(pc.n_policies(), 0.0);
  for (int j = 0; j < m; ++j) {
    const double w = m > 1 ? weights_used[j] : 1.0;
    for (int p = 0; p < pc.n_policies(); ++p) mix[p] += w * q[j][p];
  }
  return {fb, acct.of_policy_dist(mix), chosen, s.mu_values[chosen]};
}

Trajectory run_corral(const Instance& inst, const EstimatorConfig& est,
                      const CorralConfig& cfg, long long T, SplitMix64& rng,
                      CorralProbe* probe) {
  CorralState s = init_corral(inst, est, cfg, T);
  const RegretAccountant acct(inst);

  Trajectory traj;
  traj.rows.reserve(T);
  double cum_r = 0.0, cum_c = 0.0;
  double min_weight = 1.0;

  for (long long t = 1; t <= T; ++t) {
    // Weights used this round, for the probe.
    if (probe && s.mu_values.size() > 1) {
      for (double w : s.master_weights) min_weight = std::min(min_weight, w);
    }
    const CorralRoundResult r = corral_round(s, inst, acct, t, rng);
    cum_r += r.reg.reg_r;
    cum_c += r.reg.reg_c;
    traj.rows.push_back({t, r.fb.context, r.fb.action, r.fb.reward, r.fb.xi,
                         r.fb.z, r.reg.reg_r, r.reg.reg_c, cum_r, cum_c,
                         s.sets.n_surviving(), r.mu, 0.0});
  }
  traj.total_z = s.z_count;
  traj.total_queries = s.queries;
  if (probe) {
    probe->min_master_weight = min_weight;
    probe->base_internal_rounds.clear();
    for (const auto& b : s.bases) {
      probe->base_internal_rounds.push_back(b.t_internal);
    }
    probe->final_master_weights = s.master_weights;
    probe->final_surviving = s.sets.n_surviving();
  }
  return traj;
}

}  // namespace cbus
