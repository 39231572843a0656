#include "cbus/efbo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cbus/oracle.hpp"

namespace cbus {

namespace {

// Per-(context, action) sums that make every policy evaluation O(|X|).
struct BatchSums {
  int n_contexts = 0, n_actions = 0;
  std::vector<double> sum;  // flat [context][action]
  double& at(int x, int a) { return sum[static_cast<std::size_t>(x) * n_actions + a]; }
  double at(int x, int a) const { return sum[static_cast<std::size_t>(x) * n_actions + a]; }
};

BatchSums reward_sums(std::span<const RewardSample> batch, int nx, int k) {
  BatchSums s{nx, k, std::vector<double>(static_cast<std::size_t>(nx) * k, 0.0)};
  for (const auto& r : batch) s.at(r.context, r.action) += r.reward;
  return s;
}

BatchSums delta_sums(std::span<const DeltaSample> batch, int nx, int k) {
  BatchSums s{nx, k, std::vector<double>(static_cast<std::size_t>(nx) * k, 0.0)};
  for (const auto& d : batch) {
    for (int a = 0; a < k; ++a) s.at(d.context, a) += d.row[a];
  }
  return s;
}

double policy_sum(const BatchSums& s, const PolicyClass& pc, int policy) {
  double acc = 0.0;
  for (int x = 0; x < s.n_contexts; ++x) acc += s.at(x, pc.action(policy, x));
  return acc;
}

}  // namespace

EfboConfig resolve_efbo_config(EfboConfig cfg, long long T, int K,
                               double instance_epsilon) {
  if (T < 8) throw std::invalid_argument("efbo: horizon must be >= 8");
  if (cfg.T0 <= 0) {
    cfg.T0 = static_cast<long long>(
        std::ceil(std::pow(static_cast<double>(T), 2.0 / 3.0)));
  }
  if (4 * cfg.T0 > T) {
    throw std::invalid_argument("efbo: 4*T0 must not exceed the horizon");
  }
  if (cfg.B <= 0.0) cfg.B = static_cast<double>(T) / cfg.T0;
  if (cfg.B < 1.0) throw std::invalid_argument("efbo: B must be >= 1");
  if (cfg.S <= 0) {
    cfg.S = static_cast<long long>(std::ceil(cfg.B * cfg.T0));
  }
  if (cfg.eta_mwu <= 0.0) cfg.eta_mwu = std::sqrt(1.0 / (cfg.S * cfg.B));
  if (cfg.epsilon < 0.0) cfg.epsilon = instance_epsilon;
  if (cfg.mu_grid.empty()) cfg.mu_grid = mu_grid(T, K);
  return cfg;
}

std::vector<double> mu_grid(long long T, int K) {
  if (T < 2 || K < 2) throw std::invalid_argument("mu_grid: need T >= 2, K >= 2");
  const int n_max = static_cast<int>(std::floor(std::log2(static_cast<double>(T))));
  std::vector<double> grid;
  for (int n = 1; n <= n_max; ++n) {
    const double step = std::ldexp(1.0, -n);  // 2^-n
    grid.push_back(1.0 - step);
    grid.push_back(1.0 / K + step);
  }
  std::sort(grid.begin(), grid.end());
  std::vector<double> out;
  for (double v : grid) {
    if (v <= 0.0 || v >= 1.0) continue;  // blend weights live strictly inside
    if (out.empty() || v - out.back() > 1e-12) out.push_back(v);
  }
  return out;
}

double ips_reward_estimate(std::span<const RewardSample> batch,
                           const PolicyClass& pc, int policy, int K) {
  if (batch.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : batch) {
    if (r.action == pc.action(policy, r.context)) acc += r.reward;
  }
  return acc * K / static_cast<double>(batch.size());
}

double empirical_constraint_regret(std::span<const DeltaSample> batch,
                                   const PolicyClass& pc, int policy) {
  if (batch.empty()) return 0.0;
  std::vector<double> totals(pc.n_policies(), 0.0);
  for (const auto& d : batch) {
    for (int p = 0; p < pc.n_policies(); ++p) {
      totals[p] += d.row[pc.action(p, d.context)];
    }
  }
  const double best = *std::min_element(totals.begin(), totals.end());
  return (totals[policy] - best) / static_cast<double>(batch.size());
}

double blended_reward(const ExplorationLog& log, const PolicyClass& pc,
                      int policy, double mu, int K) {
  const double ips = ips_reward_estimate(log.reward_batch_1, pc, policy, K);
  double full = 0.0;
  if (!log.delta_batch_2.empty()) {
    for (const auto& d : log.delta_batch_2) {
      full += 1.0 - d.row[pc.action(policy, d.context)];
    }
    full /= static_cast<double>(log.delta_batch_2.size());
  }
  return mu * ips + (1.0 - mu) * full;
}

double lagrangian(std::span<const double> q, double lambda, double mu,
                  const ExplorationLog& log, const PolicyClass& pc,
                  double epsilon) {
  if (static_cast<int>(q.size()) != pc.n_policies()) {
    throw std::invalid_argument("lagrangian: distribution size mismatch");
  }
  double reward = 0.0, creg = 0.0;
  for (int p = 0; p < pc.n_policies(); ++p) {
    if (q[p] == 0.0) continue;
    reward += q[p] * blended_reward(log, pc, p, mu, pc.n_actions());
    creg += q[p] * empirical_constraint_regret(log.delta_batch_1, pc, p);
  }
  return reward - lambda * (creg - epsilon);
}

std::vector<double> best_response(double lambda, double mu,
                                  const ExplorationLog& log,
                                  const PolicyClass& pc) {
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < pc.n_policies(); ++p) {
    const double val =
        blended_reward(log, pc, p, mu, pc.n_actions()) -
        lambda * empirical_constraint_regret(log.delta_batch_1, pc, p);
    if (val > best_val) {
      best_val = val;
      best = p;
    }
  }
  std::vector<double> q(pc.n_policies(), 0.0);
  q[best] = 1.0;
  return q;
}

double mwu_update(double lambda, double violation, double eta, double B) {
  return std::min(lambda * std::exp(eta * violation), B);
}

SaddleResult saddle_solve(double mu, const ExplorationLog& log,
                          const PolicyClass& pc, const EfboConfig& cfg) {
  if (cfg.B < 1.0 || cfg.S < 1) {
    throw std::invalid_argument("saddle_solve: need B >= 1 and S >= 1");
  }
  if (cfg.epsilon < 0.0) {
    throw std::invalid_argument("saddle_solve: epsilon must be resolved");
  }
  const double eta =
      cfg.eta_mwu > 0.0 ? cfg.eta_mwu : std::sqrt(1.0 / (cfg.S * cfg.B));
  const int n = pc.n_policies();
  const int k = pc.n_actions();
  const int nx = pc.n_contexts();

  // Aggregate once; each saddle iteration is then O(|Pi|).
  const BatchSums r1 = reward_sums(log.reward_batch_1, nx, k);
  const BatchSums d1 = delta_sums(log.delta_batch_1, nx, k);
  const BatchSums d2 = delta_sums(log.delta_batch_2, nx, k);
  const double n1 = std::max<std::size_t>(log.reward_batch_1.size(), 1);
  const double m1 = std::max<std::size_t>(log.delta_batch_1.size(), 1);
  const double m2 = std::max<std::size_t>(log.delta_batch_2.size(), 1);

  std::vector<double> blend(n), creg(n);
  double cons_min = std::numeric_limits<double>::infinity();
  for (int p = 0; p < n; ++p) {
    const double ips = policy_sum(r1, pc, p) * k / n1;
    const double full =
        log.delta_batch_2.empty() ? 0.0 : 1.0 - policy_sum(d2, pc, p) / m2;
    blend[p] = mu * ips + (1.0 - mu) * full;
    creg[p] = policy_sum(d1, pc, p) / m1;
    cons_min = std::min(cons_min, creg[p]);
  }
  for (int p = 0; p < n; ++p) creg[p] -= cons_min;

  std::vector<double> q_count(n, 0.0);
  SaddleDiagnostics diag;
  diag.lambda_trace.reserve(cfg.S);
  double lambda = 1.0 / cfg.B;
  for (long long s = 0; s < cfg.S; ++s) {
    diag.lambda_trace.push_back(lambda);
    int best = 0;
    double best_val = blend[0] - lambda * creg[0];
    for (int p = 1; p < n; ++p) {
      const double val = blend[p] - lambda * creg[p];
      if (val > best_val) {
        best_val = val;
        best = p;
      }
    }
    q_count[best] += 1.0;
    lambda = mwu_update(lambda, creg[best] - cfg.epsilon, eta, cfg.B);
  }

  SaddleResult out;
  out.q.resize(n);
  double q_reward = 0.0, q_creg = 0.0;
  for (int p = 0; p < n; ++p) {
    out.q[p] = q_count[p] / static_cast<double>(cfg.S);
    q_reward += out.q[p] * blend[p];
    q_creg += out.q[p] * creg[p];
  }

  // Empirical saddle gap: best primal value at the averaged dual minus the
  // dual player's best value against the averaged primal.
  double lambda_bar = 0.0;
  for (double l : diag.lambda_trace) lambda_bar += l;
  lambda_bar /= static_cast<double>(cfg.S);
  double primal_best = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < n; ++p) {
    primal_best =
        std::max(primal_best, blend[p] - lambda_bar * (creg[p] - cfg.epsilon));
  }
  const double q_violation = q_creg - cfg.epsilon;
  const double dual_best =
      q_reward - (q_violation > 0.0 ? cfg.B * q_violation : 0.0);
  diag.duality_gap = primal_best - dual_best;
  out.diag = std::move(diag);
  return out;
}

double select_mu(const std::map<double, std::vector<double>>& candidates,
                 std::span<const RewardSample> held_out_batch,
                 const PolicyClass& pc, int K) {
  if (candidates.empty()) {
    throw std::invalid_argument("select_mu: no candidate blends");
  }
  std::vector<double> ips(pc.n_policies());
  for (int p = 0; p < pc.n_policies(); ++p) {
    ips[p] = ips_reward_estimate(held_out_batch, pc, p, K);
  }
  double best_mu = candidates.begin()->first;
  double best_val = -std::numeric_limits<double>::infinity();
  for (const auto& [mu, q] : candidates) {
    double val = 0.0;
    for (int p = 0; p < pc.n_policies(); ++p) val += q[p] * ips[p];
    if (val > best_val) {  // map iterates ascending, so ties keep smaller mu
      best_val = val;
      best_mu = mu;
    }
  }
  return best_mu;
}

Trajectory run_efbo(const Instance& inst, EfboConfig cfg, long long T,
                    SplitMix64& rng) {
  const int k = inst.n_actions();
  cfg = resolve_efbo_config(cfg, T, k, inst.epsilon);
  const long long t0 = cfg.T0;
  const int a0 = inst.user.revealing_action;
  const RegretAccountant acct(inst);

  Trajectory traj;
  traj.rows.reserve(T);
  double cum_r = 0.0, cum_c = 0.0;
  const int n_pol = inst.n_policies();

  auto push_row = [&](long long t, const Feedback& fb, RegretPair reg,
                      double mu, double lambda) {
    cum_r += reg.reg_r;
    cum_c += reg.reg_c;
    traj.rows.push_back({t, fb.context, fb.action, fb.reward, fb.xi, fb.z,
                         reg.reg_r, reg.reg_c, cum_r, cum_c, n_pol, mu,
                         lambda});
  };

  ExplorationLog log;
  log.reward_batch_1.reserve(t0);
  log.delta_batch_1.reserve(t0);
  log.delta_batch_2.reserve(t0);
  log.reward_batch_2.reserve(t0);

  const RegretPair unif_reg = acct.of_uniform_action();
  const RegretPair reveal_reg = acct.of_action(a0);

  long long t = 1;
  for (long long i = 0; i < t0; ++i, ++t) {
    const int x = rng.categorical(inst.contexts.probs);
    const Feedback fb = env_step(inst, x, rng.next_below(k), false, rng);
    log.reward_batch_1.push_back({x, fb.action, fb.reward});
    push_row(t, fb, unif_reg, 0.0, 0.0);
  }
  for (int half = 0; half < 2; ++half) {
    auto& batch = half == 0 ? log.delta_batch_1 : log.delta_batch_2;
    for (long long i = 0; i < t0; ++i, ++t) {
      const int x = rng.categorical(inst.contexts.probs);
      const Feedback fb = env_step(inst, x, a0, true, rng);
      batch.push_back({x, *fb.delta_row});
      push_row(t, fb, reveal_reg, 0.0, 0.0);
      ++traj.total_z;
    }
  }
  for (long long i = 0; i < t0; ++i, ++t) {
    const int x = rng.categorical(inst.contexts.probs);
    const Feedback fb = env_step(inst, x, rng.next_below(k), false, rng);
    log.reward_batch_2.push_back({x, fb.action, fb.reward});
    push_row(t, fb, unif_reg, 0.0, 0.0);
  }

  std::map<double, std::vector<double>> candidates;
  std::map<double, double> lambda_bars;
  for (double mu : cfg.mu_grid) {
    SaddleResult res = saddle_solve(mu, log, inst.policies, cfg);
    double lb = 0.0;
    for (double l : res.diag.lambda_trace) lb += l;
    lambda_bars[mu] = lb / static_cast<double>(res.diag.lambda_trace.size());
    candidates.emplace(mu, std::move(res.q));
  }
  const double mu_hat =
      select_mu(candidates, log.reward_batch_2, inst.policies, k);
  const std::vector<double>& q_hat = candidates.at(mu_hat);
  const double lambda_hat = lambda_bars.at(mu_hat);
  const RegretPair commit_reg = acct.of_policy_dist(q_hat);

  // Commit: a fresh policy draw each round, so the played distribution is
  // exactly q_hat.
  for (; t <= T; ++t) {
    const int x = rng.categorical(inst.contexts.probs);
    const int pi = rng.categorical(q_hat);
    const Feedback fb =
        env_step(inst, x, inst.policies.action(pi, x), false, rng);
    push_row(t, fb, commit_reg, mu_hat, lambda_hat);
  }
  return traj;
}

double blend_bound_expression(double mu, long long T, int K,
                              double n_policies, double alpha, double dfrak) {
  const double denom = mu + alpha * (1.0 - mu);
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  const double lt = std::log(n_policies * static_cast<double>(T));
  const double numer =
      std::pow(static_cast<double>(T), 2.0 / 3.0) *
          std::sqrt((mu * mu * K + (1.0 - mu) * (1.0 - mu)) * lt) +
      static_cast<double>(T) * (1.0 - mu) * dfrak;
  return numer / denom;
}

}  // namespace cbus
