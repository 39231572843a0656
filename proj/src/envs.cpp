#include "cbus/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cbus/oracle.hpp"

namespace cbus {

namespace {

constexpr int kRevealingAction = 0;

// Number of distinct rows of length n over an alphabet of size k, saturated
// so comparisons against desk-scale policy counts never overflow.
long long row_space_size(int k, int n) {
  long long cap = 1;
  for (int i = 0; i < n; ++i) {
    if (cap > (1LL << 40)) return 1LL << 40;
    cap *= k;
  }
  return cap;
}

// Distinct random policies over the full action alphabet. Falls back to
// full enumeration plus a partial shuffle when the space is tight, so
// generation always terminates.
std::vector<std::vector<int>> random_policy_rows(int n_policies,
                                                 int n_contexts, int k,
                                                 SplitMix64& rng) {
  const long long space = row_space_size(k, n_contexts);
  if (n_policies > space) {
    throw std::invalid_argument(
        "generator: more policies requested than distinct maps exist");
  }
  if (space <= 4LL * n_policies) {
    std::vector<std::vector<int>> all;
    all.reserve(space);
    std::vector<int> row(n_contexts, 0);
    for (long long i = 0; i < space; ++i) {
      all.push_back(row);
      for (int x = 0; x < n_contexts; ++x) {
        if (++row[x] < k) break;
        row[x] = 0;
      }
    }
    // Partial Fisher-Yates: the first n_policies slots become the sample.
    for (int i = 0; i < n_policies; ++i) {
      const int j = i + rng.next_below(static_cast<int>(space - i));
      std::swap(all[i], all[j]);
    }
    all.resize(n_policies);
    return all;
  }
  std::vector<std::vector<int>> rows;
  std::set<std::vector<int>> seen;
  std::vector<int> row(n_contexts);
  while (static_cast<int>(rows.size()) < n_policies) {
    for (int x = 0; x < n_contexts; ++x) row[x] = rng.next_below(k);
    if (seen.insert(row).second) rows.push_back(row);
  }
  return rows;
}

SurrogateLoss loss_from_points(const std::vector<std::vector<double>>& pts) {
  const int nx = static_cast<int>(pts.size());
  const int k = static_cast<int>(pts[0].size());
  SurrogateLoss loss;
  loss.n_contexts = nx;
  loss.n_actions = k;
  loss.values.resize(static_cast<std::size_t>(nx) * k * k);
  for (int x = 0; x < nx; ++x) {
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        loss.values[(static_cast<std::size_t>(x) * k + a) * k + b] =
            std::fabs(pts[x][a] - pts[x][b]);
      }
    }
  }
  return loss;
}

std::vector<std::vector<double>> random_table(int nx, int k, SplitMix64& rng) {
  std::vector<std::vector<double>> t(nx, std::vector<double>(k));
  for (auto& row : t) {
    for (auto& v : row) v = rng.next_double();
  }
  return t;
}

// Full-support demonstration law, entries bounded away from zero.
std::vector<double> random_distribution(int k, SplitMix64& rng) {
  std::vector<double> w(k);
  double sum = 0.0;
  for (auto& v : w) {
    v = 0.1 + rng.next_double();
    sum += v;
  }
  for (auto& v : w) v /= sum;
  // Renormalize exactly so the sum-to-1 invariant holds to 1e-12.
  const double s2 = std::accumulate(w.begin(), w.end(), 0.0);
  w.back() += 1.0 - s2;
  return w;
}

Instance assemble(int nx, int k, std::vector<std::vector<int>> rows,
                  std::vector<std::vector<double>> mu_b, SurrogateLoss loss,
                  UserModel user, double epsilon) {
  Instance inst;
  inst.contexts.n_contexts = nx;
  inst.contexts.probs.assign(nx, 1.0 / nx);
  inst.contexts.probs.back() +=
      1.0 - std::accumulate(inst.contexts.probs.begin(),
                            inst.contexts.probs.end(), 0.0);
  std::vector<int> flat;
  flat.reserve(rows.size() * nx);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  inst.policies = PolicyClass(static_cast<int>(rows.size()), nx, k,
                              std::move(flat));
  inst.mu_b = std::move(mu_b);
  inst.loss = std::move(loss);
  inst.user = std::move(user);
  inst.epsilon = epsilon;
  return inst;
}

UserModel random_user(int nx, int k, SplitMix64& rng) {
  UserModel u;
  u.revealing_action = kRevealingAction;
  u.bar_a_probs.reserve(nx);
  u.reveal_prob = random_table(nx, k, rng);
  for (int x = 0; x < nx; ++x) {
    u.bar_a_probs.push_back(random_distribution(k, rng));
    u.reveal_prob[x][kRevealingAction] = 1.0;
  }
  return u;
}

void check_sizes(const GeneratorSpec& spec) {
  if (spec.n_contexts < 1 || spec.K < 2 || spec.n_policies < 1) {
    throw std::invalid_argument("generator: sizes must satisfy |X|>=1, K>=2, |Pi|>=1");
  }
  if (spec.nu < 0 || spec.tau < 0 || spec.epsilon < 0) {
    throw std::invalid_argument("generator: nu, tau, epsilon must be >= 0");
  }
}

}  // namespace

Instance make_lower_bound(const LowerBoundParams& params, double epsilon) {
  if (!(params.gamma > 0.0 && params.gamma < 0.5)) {
    throw std::invalid_argument("lower bound: gamma must lie in (0, 1/2)");
  }
  if (!(params.c > 0.0 && params.c <= 0.5)) {
    // Revelation zeroes the observed reward everywhere except pi_1's action
    // on the negative class, so the effective gap cannot exceed 1/2.
    throw std::invalid_argument("lower bound: c must lie in (0, 1/2]");
  }
  const double g = params.gamma;

  // Context 0 is the positive sign class, context 1 the negative one.
  // Action 0 (= the revealing action) is the positive-sign action.
  std::vector<std::vector<int>> rows = {{0, 1}, {1, 0}};  // pi_1, pi_2

  SurrogateLoss loss;
  loss.n_contexts = 2;
  loss.n_actions = 2;
  loss.values = {0, 0, 0, 0,   // positive class: identically zero
                 0, 1, 1, 0};  // negative class: mismatch indicator

  UserModel user;
  user.revealing_action = kRevealingAction;
  if (params.strategy == UserStrategy::S1) {
    user.bar_a_probs = {{0.5, 0.5}, {0.5, 0.5}};
  } else {
    // The demonstration lands on the sign-opposed action w.p. 1/2 + gamma.
    user.bar_a_probs = {{0.5 - g, 0.5 + g}, {0.5 + g, 0.5 - g}};
  }
  user.reveal_prob = {{1.0, 1.0}, {1.0, 0.0}};

  std::vector<std::vector<double>> mu_b = {{0.0, 0.0}, {0.0, 2.0 * params.c}};

  return assemble(2, 2, std::move(rows), std::move(mu_b), std::move(loss),
                  std::move(user),
                  epsilon < 0.0 ? params.gamma / 2.0 : epsilon);
}

Instance make_random(const GeneratorSpec& spec, SplitMix64& rng) {
  check_sizes(spec);
  const int nx = spec.n_contexts, k = spec.K;
  auto rows = random_policy_rows(spec.n_policies, nx, k, rng);
  auto mu_b = random_table(nx, k, rng);
  auto points = random_table(nx, k, rng);
  return assemble(nx, k, std::move(rows), std::move(mu_b),
                  loss_from_points(points), random_user(nx, k, rng),
                  spec.epsilon);
}

Instance make_triggered(const GeneratorSpec& spec, SplitMix64& rng) {
  check_sizes(spec);
  const int nx = spec.n_contexts, k = spec.K;
  const double nu = spec.nu;
  auto rows = random_policy_rows(spec.n_policies, nx, k, rng);
  auto mu_b = random_table(nx, k, rng);

  UserModel user;
  user.revealing_action = kRevealingAction;
  user.trigger_slack = nu;
  user.reveal_prob = random_table(nx, k, rng);

  // Deterministic demonstration with a cluster of actions within nu of it;
  // everything outside the cluster will be forced to reveal, so the
  // non-revealed rewards stay observable.
  std::vector<std::vector<double>> points(nx, std::vector<double>(k));
  for (int x = 0; x < nx; ++x) {
    const int bar = rng.next_below(k);
    std::vector<double> barp(k, 0.0);
    barp[bar] = 1.0;
    user.bar_a_probs.push_back(std::move(barp));
    const double base = rng.next_double();
    for (int a = 0; a < k; ++a) {
      if (a == bar) {
        points[x][a] = base;
      } else if (rng.bernoulli(0.5)) {
        // Within-slack cluster; the 0.999 keeps the forced-reveal threshold
        // strict under rounding.
        const double off = (2.0 * rng.next_double() - 1.0) * 0.999 * nu;
        points[x][a] = std::clamp(base + off, 0.0, 1.0);
      } else {
        points[x][a] = rng.next_double();
      }
    }
  }
  auto loss = loss_from_points(points);
  for (int x = 0; x < nx; ++x) {
    user.reveal_prob[x][kRevealingAction] = 1.0;
    const int bar = static_cast<int>(
        std::max_element(user.bar_a_probs[x].begin(),
                         user.bar_a_probs[x].end()) -
        user.bar_a_probs[x].begin());
    for (int a = 0; a < k; ++a) {
      const double d = loss.values[(static_cast<std::size_t>(x) * k + a) * k + bar];
      if (d > nu) user.reveal_prob[x][a] = 1.0;
    }
  }
  return assemble(nx, k, std::move(rows), std::move(mu_b), std::move(loss),
                  std::move(user), spec.epsilon);
}

Instance make_massart(const GeneratorSpec& spec, SplitMix64& rng) {
  check_sizes(spec);
  const int nx = spec.n_contexts, k = spec.K;
  const double eps = spec.epsilon, tau = spec.tau;
  const double margin = eps + tau;
  if (margin > 1.0) {
    throw std::runtime_error("massart: epsilon + tau exceeds the loss range");
  }
  // Non-minimizer actions sit well above the margin, not just at it; this
  // keeps disagreement losses large so disagreeing policies separate fast.
  const double lo = std::min(1.0, std::max(1.6 * margin, spec.weak_margin
                                                             ? 3.0 * eps + tau
                                                             : margin));
  if (spec.weak_margin && 3.0 * eps + tau > 1.0) {
    throw std::runtime_error("massart: weak-form excess exceeds the loss range");
  }

  // pibar's action per context, demonstrated deterministically.
  std::vector<int> pibar(nx);
  for (int x = 0; x < nx; ++x) pibar[x] = rng.next_below(k);

  const double close_cap = (2.0 * eps + tau) / 4.0;
  std::vector<std::vector<double>> points(nx, std::vector<double>(k));
  std::vector<int> close_action(nx, -1);
  for (int x = 0; x < nx; ++x) {
    for (int a = 0; a < k; ++a) {
      points[x][a] = a == pibar[x] ? 0.0 : lo + rng.next_double() * (1.0 - lo);
    }
    if (spec.weak_margin && k >= 3) {
      // One pointwise-close alternative per context for the dichotomy's
      // second branch.
      int a = rng.next_below(k);
      while (a == pibar[x]) a = rng.next_below(k);
      close_action[x] = a;
      points[x][a] = rng.next_double() * close_cap;
    }
  }

  // Per-context list of actions whose points sit at or above lo.
  std::vector<std::vector<int>> far_actions(nx);
  for (int x = 0; x < nx; ++x) {
    for (int a = 0; a < k; ++a) {
      if (a != pibar[x] && a != close_action[x]) far_actions[x].push_back(a);
    }
    if (far_actions[x].empty()) {
      throw std::runtime_error("massart: no far action left in some context");
    }
  }

  // Policy 0 is pibar; the rest disagree with it in every context and only
  // use far actions, so their expected excess is at least lo (>= 3 eps + tau
  // in the weak form). The weak form adds the single everywhere-close row.
  long long space = 1;
  for (int x = 0; x < nx; ++x) {
    space = std::min(space * static_cast<long long>(far_actions[x].size()),
                     1LL << 40);
  }
  const int want_far =
      spec.n_policies - 1 - (spec.weak_margin && k >= 3 ? 1 : 0);
  if (want_far > space) {
    throw std::invalid_argument(
        "massart: more policies requested than everywhere-disagreeing maps exist");
  }
  std::vector<std::vector<int>> rows;
  rows.push_back(pibar);
  std::set<std::vector<int>> seen;
  seen.insert(pibar);
  if (spec.weak_margin && k >= 3 &&
      static_cast<int>(rows.size()) < spec.n_policies) {
    rows.push_back(close_action);
    seen.insert(close_action);
  }
  std::vector<int> row(nx);
  while (static_cast<int>(rows.size()) < spec.n_policies) {
    for (int x = 0; x < nx; ++x) {
      row[x] = far_actions[x][rng.next_below(
          static_cast<int>(far_actions[x].size()))];
    }
    if (seen.insert(row).second) rows.push_back(row);
  }

  UserModel user;
  user.revealing_action = kRevealingAction;
  user.bar_a_probs.assign(nx, std::vector<double>(k, 0.0));
  user.reveal_prob.assign(nx, std::vector<double>(k, 0.0));
  for (int x = 0; x < nx; ++x) {
    user.bar_a_probs[x][pibar[x]] = 1.0;
    user.reveal_prob[x][kRevealingAction] = 1.0;
  }

  return assemble(nx, k, std::move(rows), random_table(nx, k, rng),
                  loss_from_points(points), std::move(user), eps);
}

Instance make_aligned(const GeneratorSpec& spec, SplitMix64& rng) {
  check_sizes(spec);
  if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) {
    // The loss range [0,1] caps the affine slope the embedding can realize.
    throw std::invalid_argument("aligned: alpha must lie in (0, 1]");
  }
  const int nx = spec.n_contexts, k = spec.K;
  auto rows = random_policy_rows(spec.n_policies, nx, k, rng);
  auto mu_b = random_table(nx, k, rng);

  UserModel user;
  user.revealing_action = kRevealingAction;
  user.reveal_prob.assign(nx, std::vector<double>(k, 0.0));
  user.bar_a_probs.assign(nx, std::vector<double>(k, 0.0));

  const double zeta = 0.495 * spec.dfrak;  // per-point noise, defect <= 2*zeta
  std::vector<std::vector<double>> points(nx, std::vector<double>(k));
  for (int x = 0; x < nx; ++x) {
    user.reveal_prob[x][kRevealingAction] = 1.0;
    for (int a = 0; a < k; ++a) {
      const double r_eff =
          a == kRevealingAction ? 0.0 : mu_b[x][a];  // revelation zeroes a0
      const double noise = (2.0 * rng.next_double() - 1.0) * zeta;
      points[x][a] = std::clamp(spec.alpha * (1.0 - r_eff) + noise, 0.0, 1.0);
    }
    // The demonstration sits at the per-context minimum point, so every
    // dissimilarity to it is point - min: affine in effective reward up to
    // the noise, with a per-context offset that cancels in regrets.
    const int bar = static_cast<int>(
        std::min_element(points[x].begin(), points[x].end()) -
        points[x].begin());
    user.bar_a_probs[x][bar] = 1.0;
  }

  Instance inst = assemble(nx, k, std::move(rows), std::move(mu_b),
                           loss_from_points(points), std::move(user),
                           spec.epsilon);
  const double certified = similarity_d(inst, spec.alpha);
  if (certified > spec.dfrak + 1e-9) {
    throw std::runtime_error("aligned: similarity certification failed");
  }
  return inst;
}

Instance make_instance(const GeneratorSpec& spec) {
  SplitMix64 rng(spec.seed);
  switch (spec.kind) {
    case GeneratorKind::lower_bound:
      return make_lower_bound(spec.lb,
                              spec.epsilon > 0 ? spec.epsilon : -1.0);
    case GeneratorKind::random:
      return make_random(spec, rng);
    case GeneratorKind::triggered:
      return make_triggered(spec, rng);
    case GeneratorKind::massart:
      return make_massart(spec, rng);
    case GeneratorKind::aligned:
      return make_aligned(spec, rng);
  }
  throw std::invalid_argument("make_instance: unknown generator kind");
}

}  // namespace cbus
