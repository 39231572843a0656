#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cbus/corral.hpp"
#include "cbus/estimators.hpp"
#include "test_util.hpp"

using namespace cbus;

TEST_SUITE("corral") {

TEST_CASE("tsallis weights: shape, shift invariance, monotonicity") {
  const std::vector<double> zero = {0.0, 0.0, 0.0, 0.0};
  const auto uniform = tsallis_weights(zero, 0.7);
  for (double w : uniform) CHECK(w == doctest::Approx(0.25));

  const std::vector<double> losses = {1.0, 3.0, 0.5, 2.0};
  const auto w = tsallis_weights(losses, 0.5);
  double sum = 0.0;
  for (double v : w) sum += v;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(w[2] > w[0]);
  CHECK(w[0] > w[3]);
  CHECK(w[3] > w[1]);

  std::vector<double> shifted = losses;
  for (double& v : shifted) v += 10.0;
  const auto ws = tsallis_weights(shifted, 0.5);
  for (int i = 0; i < 4; ++i) CHECK(ws[i] == doctest::Approx(w[i]));
}

TEST_CASE("a single-base corral is exactly one Exp4 learner") {
  const Instance inst = cbus_test::triggered_instance(5, 4, 16, 0.1, 0.05, 90);
  const long long T = 300;
  EstimatorConfig est;
  est.kind = EstimatorKind::biased;
  est.nu = 0.1;
  CorralConfig cfg;
  cfg.mu_values = {0.5};

  SplitMix64 rng_corral(1234);
  const Trajectory via_corral = run_corral(inst, est, cfg, T, rng_corral);

  // Reference: the same learner written out longhand with the public
  // operations, consuming draws in the documented order.
  SplitMix64 rng(1234);
  const RegretAccountant acct(inst);
  Exp4State st = make_exp4_state(0.5, inst.n_policies(), inst.n_actions());
  NestedPolicySets sets(inst.n_policies());
  double cum_r = 0.0, cum_c = 0.0;
  for (long long t = 1; t <= T; ++t) {
    const int x = rng.categorical(inst.contexts.probs);
    const auto q = exp4_distribution(st, sets.surviving);
    const int pi = rng.categorical(q);
    const int a = inst.policies.action(pi, x);
    const Feedback fb = env_step(inst, x, a, false, rng);
    double prop = 0.0;
    for (int p = 0; p < inst.n_policies(); ++p) {
      if (inst.policies.action(p, x) == a) prop += q[p];
    }
    const auto row = biased_delta(fb.xi, a, fb.bar_a, x, inst.loss);
    const auto v =
        exp4_loss_vector(0.5, false, a, fb.reward, prop, row, inst.policies, x);
    exp4_update(st, v, false);
    shrink_biased(sets, inst.policies, x, row, est.nu, inst.epsilon,
                  est.delta_conf, T);
    const RegretPair reg = acct.of_policy_dist(q);
    cum_r += reg.reg_r;
    cum_c += reg.reg_c;

    const TrajectoryRow& got = via_corral.rows[t - 1];
    REQUIRE(got.t == t);
    REQUIRE(got.context == x);
    REQUIRE(got.action == a);
    REQUIRE(got.reward == fb.reward);
    REQUIRE(got.xi == fb.xi);
    REQUIRE_FALSE(got.z);
    REQUIRE(got.inst_reg_r == doctest::Approx(reg.reg_r).epsilon(1e-12));
    REQUIRE(got.cum_reg_r == doctest::Approx(cum_r).epsilon(1e-12));
    REQUIRE(got.cum_reg_c == doctest::Approx(cum_c).epsilon(1e-12));
    REQUIRE(got.n_surviving == sets.n_surviving());
  }
}

TEST_CASE("frozen rounds play the revealing action and touch no base") {
  const Instance inst = cbus_test::triggered_instance(4, 4, 12, 0.8, 0.05, 91);
  const long long T = 200;
  EstimatorConfig est;
  est.kind = EstimatorKind::doubly_robust;
  est.nu = 0.8;
  est.gamma_override = 0.3;
  CorralConfig cfg;  // default blend grid

  CorralState state = init_corral(inst, est, cfg, T);
  const RegretAccountant acct(inst);
  SplitMix64 rng(92);
  long long frozen = 0;
  for (long long t = 1; t <= T; ++t) {
    const auto before_losses = [&] {
      std::vector<double> all;
      for (const auto& b : state.bases) {
        all.insert(all.end(), b.cum_loss.begin(), b.cum_loss.end());
      }
      return all;
    }();
    const auto before_master = state.master_cum;
    const CorralRoundResult r = corral_round(state, inst, acct, t, rng);
    if (r.base < 0) {
      ++frozen;
      CHECK(r.fb.action == inst.user.revealing_action);
      CHECK(r.fb.z);
      const auto after_losses = [&] {
        std::vector<double> all;
        for (const auto& b : state.bases) {
          all.insert(all.end(), b.cum_loss.begin(), b.cum_loss.end());
        }
        return all;
      }();
      CHECK(after_losses == before_losses);
      CHECK(state.master_cum == before_master);
    }
  }
  CHECK(frozen > 20);  // gamma = 0.3 over 200 rounds
  CHECK(frozen == state.z_count);
}

TEST_CASE("shared loss estimates are unbiased under the mixture law") {
  const Instance inst = cbus_test::triggered_instance(4, 5, 10, 0.2, 0.05, 93);
  const int x = 1;
  // Three bases with distinct states and a non-uniform master.
  const std::vector<double> mus = {0.4, 0.7, 0.9};
  std::vector<Exp4State> bases;
  for (double mu : mus) {
    bases.push_back(make_exp4_state(mu, inst.n_policies(), 5));
  }
  SplitMix64 warm(94);
  for (auto& b : bases) {
    for (auto& l : b.cum_loss) l = warm.next_double();
  }
  const std::vector<double> master = {0.5, 0.3, 0.2};
  std::vector<std::uint8_t> alive(inst.n_policies(), 1);
  std::vector<std::vector<double>> q(3);
  std::vector<double> p_mix(inst.n_actions(), 0.0);
  for (int m = 0; m < 3; ++m) {
    q[m] = exp4_distribution(bases[m], alive);
    const auto p = exp4_action_dist(q[m], inst.policies, x);
    for (int a = 0; a < inst.n_actions(); ++a) p_mix[a] += master[m] * p[a];
  }

  // Exact blended loss with the anchor row drawn under the mixture's action
  // law: the target every base's shared estimate must hit.
  auto exact = [&](int policy, double mu) {
    const int pa = inst.policies.action(policy, x);
    double bandit = mu * (1.0 - effective_mean_reward(inst, x, pa));
    double anchor = 0.0;
    for (int a = 0; a < inst.n_actions(); ++a) {
      if (p_mix[a] <= 0.0) continue;
      const double rho = inst.user.reveal_prob[x][a];
      double row_mean = (1.0 - rho) * inst.loss(x, pa, a);
      for (int b = 0; b < inst.n_actions(); ++b) {
        row_mean += rho * inst.user.bar_a_probs[x][b] * inst.loss(x, pa, b);
      }
      anchor += p_mix[a] * row_mean;
    }
    return bandit + (1.0 - mu) * anchor;
  };

  SplitMix64 rng(95);
  const int n = 300000;
  std::vector<std::vector<cbus_test::RunningStat>> stats(
      3, std::vector<cbus_test::RunningStat>(inst.n_policies()));
  for (int i = 0; i < n; ++i) {
    const int m = rng.categorical(master);
    const int pi = rng.categorical(q[m]);
    const int a = inst.policies.action(pi, x);
    const Feedback fb = env_step(inst, x, a, false, rng);
    const auto row = biased_delta(fb.xi, a, fb.bar_a, x, inst.loss);
    for (int j = 0; j < 3; ++j) {
      const auto v = exp4_loss_vector(mus[j], false, a, fb.reward, p_mix[a],
                                      row, inst.policies, x);
      for (int pp = 0; pp < inst.n_policies(); ++pp) stats[j][pp].add(v[pp]);
    }
  }
  for (int j = 0; j < 3; ++j) {
    for (int pp = 0; pp < inst.n_policies(); ++pp) {
      CHECK(std::fabs(stats[j][pp].mean - exact(pp, mus[j])) <=
            3.0 * stats[j][pp].stderr_() + 1e-9);
    }
  }
}

TEST_CASE("with zero slack the shared estimate matches each base's counterfactual") {
  // At nu = 0 the anchor row does not depend on the played action, so the
  // estimate every base receives is unbiased for what that base would see
  // running alone.
  const Instance inst = cbus_test::triggered_instance(4, 5, 10, 0.0, 0.05, 190);
  const int x = 2;
  const double mu = 0.4;
  Exp4State base = make_exp4_state(mu, inst.n_policies(), 5);
  SplitMix64 warm(191);
  for (auto& l : base.cum_loss) l = warm.next_double();
  std::vector<std::uint8_t> alive(inst.n_policies(), 1);
  const auto q_own = exp4_distribution(base, alive);
  const auto p_own = exp4_action_dist(q_own, inst.policies, x);
  // A mixture that differs from the base's own action law.
  std::vector<double> p_mix(inst.n_actions(), 0.0);
  for (int a = 0; a < inst.n_actions(); ++a) {
    p_mix[a] = 0.5 * p_own[a] + 0.5 / inst.n_actions();
  }

  auto own_counterfactual = [&](int policy) {
    const int pa = inst.policies.action(policy, x);
    double bandit = mu * (1.0 - effective_mean_reward(inst, x, pa));
    double anchor_term = 0.0;
    for (int a = 0; a < inst.n_actions(); ++a) {
      if (p_own[a] <= 0.0) continue;
      const double rho = inst.user.reveal_prob[x][a];
      double row_mean = (1.0 - rho) * inst.loss(x, pa, a);
      for (int b = 0; b < inst.n_actions(); ++b) {
        row_mean += rho * inst.user.bar_a_probs[x][b] * inst.loss(x, pa, b);
      }
      anchor_term += p_own[a] * row_mean;
    }
    return bandit + (1.0 - mu) * anchor_term;
  };

  SplitMix64 rng(192);
  std::vector<cbus_test::RunningStat> stats(inst.n_policies());
  for (int i = 0; i < 200000; ++i) {
    const int a = rng.categorical(p_mix);
    const Feedback fb = env_step(inst, x, a, false, rng);
    const auto row = biased_delta(fb.xi, a, fb.bar_a, x, inst.loss);
    const auto v = exp4_loss_vector(mu, false, a, fb.reward, p_mix[a], row,
                                    inst.policies, x);
    for (int pp = 0; pp < inst.n_policies(); ++pp) stats[pp].add(v[pp]);
  }
  for (int pp = 0; pp < inst.n_policies(); ++pp) {
    CHECK(std::fabs(stats[pp].mean - own_counterfactual(pp)) <=
          3.0 * stats[pp].stderr_() + 1e-9);
  }
}

TEST_CASE("slack-free reveals reduce the doubly robust run to the biased run") {
  // With no trigger slack the reveal rate is zero: no deliberate reveals,
  // identical rows, and at this horizon the radii exceed the score range so
  // neither variant prunes. The two runs consume identical randomness.
  const Instance inst = cbus_test::triggered_instance(5, 4, 16, 0.0, 0.05, 96);
  const long long T = 256;
  CorralConfig cfg;
  EstimatorConfig biased_cfg, dr_cfg;
  biased_cfg.kind = EstimatorKind::biased;
  dr_cfg.kind = EstimatorKind::doubly_robust;
  dr_cfg.nu = 0.0;

  SplitMix64 r1(777), r2(777);
  CorralProbe p1, p2;
  const Trajectory a = run_corral(inst, biased_cfg, cfg, T, r1, &p1);
  const Trajectory b = run_corral(inst, dr_cfg, cfg, T, r2, &p2);
  CHECK(b.total_z == 0);
  CHECK(p1.final_surviving == inst.n_policies());
  CHECK(p2.final_surviving == inst.n_policies());
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].action == b.rows[i].action);
    CHECK(a.rows[i].context == b.rows[i].context);
    CHECK(a.rows[i].reward == b.rows[i].reward);
    CHECK(a.rows[i].cum_reg_r == b.rows[i].cum_reg_r);
  }
}

TEST_CASE("reveal budget caps deliberate reveals") {
  const Instance inst = cbus_test::triggered_instance(4, 4, 12, 0.5, 0.05, 97);
  EstimatorConfig est;
  est.kind = EstimatorKind::doubly_robust;
  est.nu = 0.5;
  est.gamma_override = 0.5;
  est.budget_cap = 5;
  SplitMix64 rng(98);
  const Trajectory traj = run_corral(inst, est, {}, 400, rng);
  CHECK(traj.total_z <= 5);
}

TEST_CASE("master weights respect the mixing floor") {
  const Instance inst = cbus_test::triggered_instance(5, 4, 16, 0.05, 0.05, 99);
  const long long T = 600;
  EstimatorConfig est;
  est.kind = EstimatorKind::biased;
  est.nu = 0.05;
  CorralConfig cfg;  // default grid, default floor 1/(2MT)
  SplitMix64 rng(100);
  CorralProbe probe;
  run_corral(inst, est, cfg, T, rng, &probe);
  const double floor =
      1.0 / (2.0 * double(probe.final_master_weights.size()) * double(T));
  CHECK(probe.min_master_weight >= floor - 1e-15);
  for (double w : probe.final_master_weights) CHECK(w >= floor - 1e-15);
  // Every base's clock advanced on every live round.
  for (long long c : probe.base_internal_rounds) CHECK(c == T);
}

TEST_CASE("active strategy: queries match reveals and the margin prunes") {
  const Instance inst = cbus_test::massart_instance(6, 5, 16, 0.5, 0.05, 101);
  const long long T = 20000;
  EstimatorConfig est;
  est.kind = EstimatorKind::active;
  SplitMix64 rng(102);
  CorralProbe probe;
  const Trajectory traj = run_corral(inst, est, {}, T, rng, &probe);
  CHECK(traj.total_queries == traj.total_z);
  const double budget = 80.0 *
                        std::log(double(T) * inst.n_policies() / est.delta_conf) /
                        (0.5 * 0.5);
  CHECK(double(traj.total_z) <= budget);
  CHECK(probe.final_surviving == 1);
}

}  // TEST_SUITE
