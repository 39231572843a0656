#include "cbus/core.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace cbus {

namespace {

std::string fmt(const char* pattern, ...) {
  char buf[256];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

}  // namespace

PolicyClass::PolicyClass(int n_policies, int n_contexts, int n_actions,
                         std::vector<int> actions)
    : n_policies_(n_policies),
      n_contexts_(n_contexts),
      n_actions_(n_actions),
      actions_(std::move(actions)) {
  if (n_policies < 1 || n_contexts < 1 || n_actions < 1) {
    throw std::invalid_argument("PolicyClass: all dimensions must be >= 1");
  }
  if (actions_.size() !=
      static_cast<std::size_t>(n_policies) * n_contexts) {
    throw std::invalid_argument("PolicyClass: table size mismatch");
  }
  for (int v : actions_) {
    if (v < 0 || v >= n_actions) {
      throw std::invalid_argument("PolicyClass: action index out of range");
    }
  }
  std::set<std::vector<int>> seen;
  for (int p = 0; p < n_policies; ++p) {
    auto r = row(p);
    if (!seen.emplace(r.begin(), r.end()).second) {
      throw std::invalid_argument("PolicyClass: duplicate policy row");
    }
  }
}

Feedback env_step(const Instance& instance, int context, int action, bool z,
                  SplitMix64& rng) {
  if (context < 0 || context >= instance.n_contexts()) {
    throw std::invalid_argument("env_step: context index out of range");
  }
  if (action < 0 || action >= instance.n_actions()) {
    throw std::invalid_argument("env_step: action index out of range");
  }
  if (z && action != instance.user.revealing_action) {
    throw std::invalid_argument(
        "env_step: z rounds must play the revealing action");
  }

  Feedback fb;
  fb.context = context;
  fb.action = action;
  fb.z = z;

  const double rho = instance.user.reveal_prob[context][action];
  if (rng.bernoulli(rho)) {
    fb.xi = true;
    fb.reward = 0.0;
    const int bar = rng.categorical(instance.user.bar_a_probs[context]);
    fb.bar_a = bar;
    auto row = instance.loss.row_given(context, bar);
    fb.delta_row.emplace(row.begin(), row.end());
  } else {
    fb.xi = false;
    fb.reward = rng.bernoulli(instance.mu_b[context][action]) ? 1.0 : 0.0;
  }
  return fb;
}

std::vector<std::string> validate_instance(const Instance& inst) {
  std::vector<std::string> out;
  const int nx = inst.contexts.n_contexts;
  const int k = inst.loss.n_actions;

  if (nx < 1) out.push_back("contexts: n_contexts must be >= 1");
  if (static_cast<int>(inst.contexts.probs.size()) != nx) {
    out.push_back("contexts: probs length differs from n_contexts");
    return out;  // dimensions broken, later checks would index out of range
  }
  double psum = 0.0;
  for (int x = 0; x < nx; ++x) {
    const double p = inst.contexts.probs[x];
    if (p < 0.0) out.push_back(fmt("contexts: negative probability at x=%d", x));
    psum += p;
  }
  if (std::fabs(psum - 1.0) > 1e-12) {
    out.push_back(fmt("contexts: probs sum to %.17g, not 1", psum));
  }

  if (inst.policies.n_contexts() != nx) {
    out.push_back("policies: context dimension differs from context space");
  }
  if (inst.policies.n_actions() != k) {
    out.push_back("policies: action dimension differs from loss tensor");
  }
  // Range and duplicate-row checks run at PolicyClass construction; re-check
  // range here so hand-built instances still get a report.
  for (int p = 0; p < inst.policies.n_policies(); ++p) {
    for (int x = 0; x < inst.policies.n_contexts(); ++x) {
      const int a = inst.policies.action(p, x);
      if (a < 0 || a >= k) {
        out.push_back(fmt("policies: entry out of range at (pi=%d, x=%d)", p, x));
      }
    }
  }

  if (inst.loss.n_contexts != nx ||
      inst.loss.values.size() !=
          static_cast<std::size_t>(nx) * k * k) {
    out.push_back("loss: tensor dimensions inconsistent");
    return out;
  }
  for (int x = 0; x < nx; ++x) {
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        const double v = inst.loss(x, a, b);
        if (v < 0.0 || v > 1.0) {
          out.push_back(fmt("loss: value outside [0,1] at (x=%d, a=%d, b=%d)", x, a, b));
        }
        if (b > a && std::fabs(v - inst.loss(x, b, a)) > 1e-12) {
          out.push_back(fmt("loss: symmetry violated at (x=%d, a=%d, b=%d)", x, a, b));
        }
      }
    }
    // Exhaustive triangle check; instances are desk-scale by construction.
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        for (int c = 0; c < k; ++c) {
          if (inst.loss(x, a, b) >
              inst.loss(x, a, c) + inst.loss(x, c, b) + 1e-12) {
            out.push_back(
                fmt("loss: triangle inequality violated at (x=%d, a=%d, via=%d, b=%d)",
                    x, a, c, b));
          }
        }
      }
    }
  }

  if (static_cast<int>(inst.mu_b.size()) != nx) {
    out.push_back("mu_b: context dimension mismatch");
  } else {
    for (int x = 0; x < nx; ++x) {
      if (static_cast<int>(inst.mu_b[x].size()) != k) {
        out.push_back(fmt("mu_b: action dimension mismatch at x=%d", x));
        continue;
      }
      for (int a = 0; a < k; ++a) {
        const double m = inst.mu_b[x][a];
        if (m < 0.0 || m > 1.0) {
          out.push_back(fmt("mu_b: mean outside [0,1] at (x=%d, a=%d)", x, a));
        }
      }
    }
  }

  const UserModel& u = inst.user;
  if (u.revealing_action < 0 || u.revealing_action >= k) {
    out.push_back("user: revealing_action out of range");
    return out;
  }
  if (static_cast<int>(u.bar_a_probs.size()) != nx ||
      static_cast<int>(u.reveal_prob.size()) != nx) {
    out.push_back("user: table context dimension mismatch");
    return out;
  }
  for (int x = 0; x < nx; ++x) {
    if (static_cast<int>(u.bar_a_probs[x].size()) != k ||
        static_cast<int>(u.reveal_prob[x].size()) != k) {
      out.push_back(fmt("user: table action dimension mismatch at x=%d", x));
      continue;
    }
    double bsum = 0.0;
    for (int a = 0; a < k; ++a) {
      const double b = u.bar_a_probs[x][a];
      if (b < 0.0) out.push_back(fmt("user: negative bar_a probability at (x=%d, a=%d)", x, a));
      bsum += b;
      const double r = u.reveal_prob[x][a];
      if (r < 0.0 || r > 1.0) {
        out.push_back(fmt("user: reveal_prob outside [0,1] at (x=%d, a=%d)", x, a));
      }
    }
    if (std::fabs(bsum - 1.0) > 1e-12) {
      out.push_back(fmt("user: bar_a_probs at x=%d sum to %.17g, not 1", x, bsum));
    }
    if (u.reveal_prob[x][u.revealing_action] != 1.0) {
      out.push_back(fmt("user: reveal_prob[x=%d][a0] != 1", x));
    }
  }
  if (u.trigger_slack) {
    const double nu = *u.trigger_slack;
    for (int x = 0; x < nx; ++x) {
      for (int a = 0; a < k; ++a) {
        if (u.reveal_prob[x][a] >= 1.0) continue;
        for (int bar = 0; bar < k; ++bar) {
          if (u.bar_a_probs[x][bar] <= 0.0) continue;
          if (inst.loss(x, a, bar) > nu + 1e-12) {
            out.push_back(
                fmt("user: trigger slack violated at (x=%d, a=%d, bar=%d): loss %.6g > nu %.6g",
                    x, a, bar, inst.loss(x, a, bar), nu));
          }
        }
      }
    }
  }

  if (inst.epsilon < 0.0) out.push_back("epsilon: must be >= 0");
  return out;
}

}  // namespace cbus
