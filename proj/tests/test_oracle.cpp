#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cbus/envs.hpp"
#include "cbus/oracle.hpp"
#include "test_util.hpp"

using namespace cbus;

namespace {

// Independent recomputation of the similarity defect straight from the
// instance tables, without going through the library's policy-level
// expectations.
double brute_force_similarity(const Instance& inst, double alpha) {
  const int n = inst.n_policies();
  std::vector<double> reward(n, 0.0), gval(n, 0.0);
  for (int p = 0; p < n; ++p) {
    for (int x = 0; x < inst.n_contexts(); ++x) {
      const int a = inst.policies.action(p, x);
      reward[p] += inst.contexts.probs[x] *
                   (1.0 - inst.user.reveal_prob[x][a]) * inst.mu_b[x][a];
      double inner = 0.0;
      for (int b = 0; b < inst.n_actions(); ++b) {
        inner += inst.user.bar_a_probs[x][b] * (1.0 - inst.loss(x, a, b));
      }
      gval[p] += inst.contexts.probs[x] * inner;
    }
  }
  // Constrained optimum by scratch enumeration.
  std::vector<double> cons(n);
  double cmin = 1e300;
  for (int p = 0; p < n; ++p) {
    cons[p] = 0.0;
    for (int x = 0; x < inst.n_contexts(); ++x) {
      const int a = inst.policies.action(p, x);
      for (int b = 0; b < inst.n_actions(); ++b) {
        cons[p] += inst.contexts.probs[x] * inst.user.bar_a_probs[x][b] *
                   inst.loss(x, a, b);
      }
    }
    cmin = std::min(cmin, cons[p]);
  }
  int star = -1;
  for (int p = 0; p < n; ++p) {
    if (cons[p] <= cmin + inst.epsilon &&
        (star < 0 || reward[p] > reward[star])) {
      star = p;
    }
  }
  double d = 0.0;
  for (int p = 0; p < n; ++p) {
    d = std::max(d, alpha * (reward[star] - reward[p]) - (gval[star] - gval[p]));
  }
  return d;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("expected reward of a constant-mean no-reveal instance") {
  Instance inst = cbus_test::tiny_instance();
  for (auto& row : inst.mu_b) std::fill(row.begin(), row.end(), 0.5);
  for (auto& row : inst.user.reveal_prob) std::fill(row.begin(), row.end(), 0.0);
  inst.user.reveal_prob[0][0] = 1.0;  // keep the revealing action's column
  inst.user.reveal_prob[1][0] = 1.0;
  // Policy 0 plays action 1 everywhere: never reveals, mean 0.5.
  CHECK(expected_reward(inst, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("full revelation forces zero expected reward") {
  Instance inst = cbus_test::tiny_instance();
  for (auto& row : inst.user.reveal_prob) std::fill(row.begin(), row.end(), 1.0);
  for (int p = 0; p < inst.n_policies(); ++p) {
    CHECK(expected_reward(inst, p) == 0.0);
  }
}

TEST_CASE("lower-bound family: reward gap is exactly c") {
  for (double c : {0.1, 0.25, 0.5}) {
    const Instance inst = make_lower_bound({c, 0.1, UserStrategy::S2});
    CHECK(expected_reward(inst, 0) - expected_reward(inst, 1) ==
          doctest::Approx(c).epsilon(1e-12));
  }
}

TEST_CASE("lower-bound family: conditional constraint values") {
  const Instance s1 = make_lower_bound({0.25, 0.1, UserStrategy::S1});
  // Conditional on the negative class (context 1), both policies sit at 1/2.
  CHECK(expected_constraint_of_action(s1, 1, s1.policies.action(0, 1)) ==
        doctest::Approx(0.5));
  CHECK(expected_constraint_of_action(s1, 1, s1.policies.action(1, 1)) ==
        doctest::Approx(0.5));

  const double gamma = 0.1;
  const Instance s2 = make_lower_bound({0.25, gamma, UserStrategy::S2});
  const double pi1 = expected_constraint_of_action(s2, 1, s2.policies.action(0, 1));
  const double pi2 = expected_constraint_of_action(s2, 1, s2.policies.action(1, 1));
  CHECK(pi2 == doctest::Approx(0.5 - gamma));
  CHECK(pi1 - pi2 == doctest::Approx(2 * gamma));
  // Unconditionally the positive class contributes zero, halving the values.
  CHECK(expected_constraint(s2, 1) == doctest::Approx((0.5 - gamma) / 2));
}

TEST_CASE("constraint vanishes when the demonstration matches the policy") {
  Instance inst = cbus_test::tiny_instance();
  // Context-1 demonstration is action 0; a policy playing 0 there scores 0
  // on that context.
  CHECK(expected_constraint_of_action(inst, 1, 0) == 0.0);
}

TEST_CASE("constrained solve on the hard family") {
  const double gamma = 0.1;
  SUBCASE("shifted demonstration with tight tolerance excludes the reward maximizer") {
    const Instance inst = make_lower_bound({0.25, gamma, UserStrategy::S2}, gamma / 2);
    const GroundTruth gt = solve_cbus(inst);
    CHECK_FALSE(gt.feasible[0]);
    CHECK(gt.feasible[1]);
    CHECK(gt.pi_star == 1);
  }
  SUBCASE("uniform demonstration keeps both feasible") {
    const Instance inst = make_lower_bound({0.25, gamma, UserStrategy::S1}, 0.0);
    const GroundTruth gt = solve_cbus(inst);
    CHECK(gt.feasible[0]);
    CHECK(gt.feasible[1]);
    CHECK(gt.pi_star == 0);
  }
  SUBCASE("tolerance one admits every policy") {
    Instance inst = make_lower_bound({0.25, gamma, UserStrategy::S2}, 1.0);
    const GroundTruth gt = solve_cbus(inst);
    for (auto f : gt.feasible) CHECK(f);
    CHECK(gt.pi_star == 0);  // global reward argmax
  }
}

TEST_CASE("solve is invariant to shifting and scaling effective rewards") {
  // Policies avoid the always-revealed action so mu_b shifts map to uniform
  // effective-reward shifts.
  Instance inst;
  inst.contexts = {2, {0.5, 0.5}};
  inst.policies = PolicyClass(4, 2, 3, {1, 1, 2, 1, 1, 2, 2, 2});
  inst.mu_b = {{0.0, 0.3, 0.6}, {0.0, 0.5, 0.1}};
  inst.loss = cbus_test::tiny_instance().loss;
  inst.user.revealing_action = 0;
  inst.user.reveal_prob = {{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  inst.user.bar_a_probs = {{0.0, 0.7, 0.3}, {0.0, 0.2, 0.8}};
  inst.epsilon = 0.1;
  REQUIRE(validate_instance(inst).empty());
  const GroundTruth base = solve_cbus(inst);

  Instance shifted = inst;
  for (auto& row : shifted.mu_b) {
    for (auto& v : row) v += 0.3;
  }
  const GroundTruth gs = solve_cbus(shifted);
  CHECK(gs.pi_star == base.pi_star);
  CHECK(gs.feasible == base.feasible);

  Instance scaled = inst;
  for (auto& row : scaled.mu_b) {
    for (auto& v : row) v *= 0.4;
  }
  const GroundTruth gc = solve_cbus(scaled);
  CHECK(gc.pi_star == base.pi_star);
  CHECK(gc.feasible == base.feasible);
}

TEST_CASE("regret of the optimum is zero") {
  const Instance inst = cbus_test::random_instance(4, 3, 10, 0.05, 5);
  const GroundTruth gt = solve_cbus(inst);
  std::vector<double> q(inst.n_policies(), 0.0);
  q[gt.pi_star] = 1.0;
  const RegretPair r = regret_step(gt, q);
  CHECK(r.reg_r == doctest::Approx(0.0));
  CHECK(r.reg_c == doctest::Approx(0.0));
}

TEST_CASE("regret of the infeasible reward maximizer on the hard family") {
  const double gamma = 0.1, c = 0.25;
  const Instance inst = make_lower_bound({c, gamma, UserStrategy::S2}, gamma / 2);
  const GroundTruth gt = solve_cbus(inst);
  std::vector<double> q = {1.0, 0.0};
  const RegretPair r = regret_step(gt, q);
  CHECK(r.reg_r == doctest::Approx(-c));     // beats the feasible optimum
  CHECK(r.reg_c == doctest::Approx(gamma));  // 2 gamma on half the contexts
}

TEST_CASE("regret is linear in the distribution") {
  const Instance inst = cbus_test::random_instance(4, 3, 10, 0.05, 6);
  const GroundTruth gt = solve_cbus(inst);
  const int other = gt.pi_star == 0 ? 1 : 0;
  std::vector<double> q(inst.n_policies(), 0.0);
  q[gt.pi_star] = 0.5;
  q[other] = 0.5;
  const RegretPair r = regret_step(gt, q);
  CHECK(r.reg_r ==
        doctest::Approx((gt.exp_reward[gt.pi_star] - gt.exp_reward[other]) / 2));

  // Mixtures over the feasible set never undershoot -epsilon on fidelity.
  std::vector<double> feas(inst.n_policies(), 0.0);
  double mass = 0.0;
  for (int p = 0; p < inst.n_policies(); ++p) {
    if (gt.feasible[p]) {
      feas[p] = 1.0;
      mass += 1.0;
    }
  }
  for (auto& v : feas) v /= mass;
  CHECK(regret_step(gt, feas).reg_c >= -inst.epsilon - 1e-12);
}

TEST_CASE("regret rejects unnormalized distributions") {
  const Instance inst = cbus_test::random_instance(3, 3, 6, 0.05, 7);
  const GroundTruth gt = solve_cbus(inst);
  std::vector<double> q(inst.n_policies(), 0.0);
  q[0] = 0.7;
  CHECK_THROWS_AS(regret_step(gt, q), std::invalid_argument);
}

TEST_CASE("similarity defect of exactly aligned losses is zero") {
  // Demonstration deterministic at the per-context point minimum and points
  // equal to 1 - effective reward: alignment is exact.
  GeneratorSpec spec;
  spec.kind = GeneratorKind::aligned;
  spec.n_contexts = 5;
  spec.K = 4;
  spec.n_policies = 12;
  spec.alpha = 1.0;
  spec.dfrak = 0.0;
  spec.seed = 9;
  const Instance inst = make_instance(spec);
  CHECK(similarity_d(inst, 1.0) <= 1e-9);
}

TEST_CASE("similarity ignores constant offsets in the dissimilarity") {
  // One context, demonstration at the smallest embedding point, and points
  // chosen so E[loss(a, demo)] = 1 - reward(a) + const for every non-revealing
  // action. Constants cancel in regret differences, so the defect is zero.
  Instance inst;
  inst.contexts = {1, {1.0}};
  inst.policies = PolicyClass(3, 1, 4, {1, 2, 3});
  inst.mu_b = {{0.0, 0.4, 0.75, 0.95}};
  const std::vector<double> pts = {1.0, 1.3 - 0.4, 1.3 - 0.75, 1.3 - 0.95};
  inst.loss.n_contexts = 1;
  inst.loss.n_actions = 4;
  inst.loss.values.resize(16);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      inst.loss.values[a * 4 + b] = std::fabs(pts[a] - pts[b]);
    }
  }
  inst.user.revealing_action = 0;
  inst.user.reveal_prob = {{1.0, 0.0, 0.0, 0.0}};
  inst.user.bar_a_probs = {{0.0, 0.0, 0.0, 1.0}};  // the smallest point
  inst.epsilon = 1.0;
  REQUIRE(validate_instance(inst).empty());
  CHECK(similarity_d(inst, 1.0) <= 1e-12);
}

TEST_CASE("similarity at alpha zero reduces to the constraint deficit") {
  const Instance inst = cbus_test::random_instance(4, 4, 16, 0.05, 11);
  const GroundTruth gt = solve_cbus(inst);
  double expect = 0.0;
  for (int p = 0; p < inst.n_policies(); ++p) {
    expect = std::max(
        expect, gt.exp_constraint[gt.pi_star] - gt.exp_constraint[p]);
  }
  CHECK(similarity_d(inst, 0.0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("similarity matches an independent brute-force recomputation") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const Instance inst = cbus_test::random_instance(5, 4, 20, 0.05, seed);
    for (double alpha : {0.0, 0.5, 1.0, 2.0}) {
      CHECK(similarity_d(inst, alpha) ==
            doctest::Approx(brute_force_similarity(inst, alpha)).epsilon(1e-10));
    }
  }
}

TEST_CASE("similarity is non-decreasing in alpha") {
  const Instance inst = cbus_test::random_instance(4, 4, 16, 0.05, 13);
  double prev = similarity_d(inst, 1.0);
  for (double alpha : {1.5, 2.0, 3.0, 5.0}) {
    const double d = similarity_d(inst, alpha);
    CHECK(d >= prev - 1e-12);
    prev = d;
  }
}

TEST_CASE("custom transform hook") {
  const Instance inst = cbus_test::random_instance(3, 3, 8, 0.05, 15);
  // g(u) = 1-u is the default; a constant transform has zero defect at alpha 0.
  CHECK(similarity_d(inst, 0.0, [](double) { return 0.5; }) == 0.0);
}

TEST_CASE("closed-form theory bounds") {
  const double t0 = 100, pies = 50, horizon = 1000, k = 6;
  SUBCASE("pure bandit blend") {
    const TheoryBounds tb = theory_bounds(t0, 1.0, 1.0, pies, horizon, 1.0, 0.0, k);
    const double lg = std::log(4 * pies * t0);
    CHECK(tb.v_t0 ==
          doctest::Approx(2 * std::sqrt(2 * t0 * k * lg) + k * lg));
    CHECK(tb.phi ==
          doctest::Approx(k * std::sqrt(horizon * std::log(pies) *
                                        std::log(horizon))));
  }
  SUBCASE("pure full-information blend") {
    const TheoryBounds tb = theory_bounds(t0, 0.0, 1.0, pies, horizon, 1.0, 0.0, k);
    const double lg = std::log(4 * pies * t0);
    CHECK(tb.v_t0 == doctest::Approx(2 * std::sqrt(2 * t0 * lg) + lg));
  }
  SUBCASE("degenerate normalizer is rejected") {
    CHECK_THROWS_AS(theory_bounds(t0, 0.0, 1.0, pies, horizon, 0.0, 0.0, k),
                    std::invalid_argument);
  }
}

TEST_CASE("accountant matches policy-level regret") {
  const Instance inst = cbus_test::random_instance(4, 4, 12, 0.05, 19);
  const RegretAccountant acct(inst);
  std::vector<double> q(inst.n_policies(), 1.0 / inst.n_policies());
  const RegretPair via_acct = acct.of_policy_dist(q);
  const RegretPair direct = regret_step(acct.truth(), q);
  CHECK(via_acct.reg_r == doctest::Approx(direct.reg_r));
  CHECK(via_acct.reg_c == doctest::Approx(direct.reg_c));

  // A point mass on a constant policy equals the fixed-action accounting.
  // Policy tables are arbitrary, so check via a synthetic constant policy:
  // fixed action a, context-marginal tables.
  const int a = 1;
  double r = 0.0, c = 0.0;
  for (int x = 0; x < inst.n_contexts(); ++x) {
    r += inst.contexts.probs[x] * effective_mean_reward(inst, x, a);
    c += inst.contexts.probs[x] * expected_constraint_of_action(inst, x, a);
  }
  const RegretPair fixed = acct.of_action(a);
  const GroundTruth& gt = acct.truth();
  CHECK(fixed.reg_r == doctest::Approx(gt.exp_reward[gt.pi_star] - r));
  CHECK(fixed.reg_c == doctest::Approx(c - gt.exp_constraint[gt.pi_star]));
}

}  // TEST_SUITE
