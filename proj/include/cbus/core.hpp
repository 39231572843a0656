#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbus/rng.hpp"

namespace cbus {

// Finite categorical distribution over contexts.
struct ContextSpace {
  int n_contexts = 0;
  std::vector<double> probs;
};

// Finite table of deterministic context -> action maps. Row i is policy i.
// Duplicate rows are rejected at construction so that argmins over the class
// are well defined.
class PolicyClass {
 public:
  PolicyClass() = default;
  PolicyClass(int n_policies, int n_contexts, int n_actions,
              std::vector<int> actions);

  int action(int policy, int context) const {
    return actions_[static_cast<std::size_t>(policy) * n_contexts_ + context];
  }
  std::span<const int> row(int policy) const {
    return {actions_.data() + static_cast<std::size_t>(policy) * n_contexts_,
            static_cast<std::size_t>(n_contexts_)};
  }

  int n_policies() const { return n_policies_; }
  int n_contexts() const { return n_contexts_; }
  int n_actions() const { return n_actions_; }
  const std::vector<int>& table() const { return actions_; }

 private:
  int n_policies_ = 0;
  int n_contexts_ = 0;
  int n_actions_ = 0;
  std::vector<int> actions_;  // row-major [policy][context]
};

// Pairwise action dissimilarity per context, values in [0,1]. Expected to be
// symmetric and to satisfy the triangle inequality in its two action
// arguments; validate_instance checks both exhaustively.
struct SurrogateLoss {
  int n_contexts = 0;
  int n_actions = 0;
  std::vector<double> values;  // flat [context][a][b]

  double operator()(int context, int a, int b) const {
    return values[(static_cast<std::size_t>(context) * n_actions + a) *
                      n_actions +
                  b];
  }
  // Contiguous slice {loss(ref, b)}_b; under symmetry this is the row of
  // dissimilarities of every action to `ref`.
  std::span<const double> row_given(int context, int ref) const {
    return {values.data() +
                (static_cast<std::size_t>(context) * n_actions + ref) *
                    n_actions,
            static_cast<std::size_t>(n_actions)};
  }
};

// The user's side of the protocol: the law of the demonstrated action, the
// per-(context, action) revelation probabilities, and the always-revealing
// action. `trigger_slack` is set when the model promises that withheld
// feedback implies the played action is within that dissimilarity of the
// demonstration.
struct UserModel {
  std::vector<std::vector<double>> bar_a_probs;  // [context] -> dist over actions
  std::vector<std::vector<double>> reveal_prob;  // [context][action]
  int revealing_action = 0;
  std::optional<double> trigger_slack;
};

// A complete simulation environment.
struct Instance {
  ContextSpace contexts;
  PolicyClass policies;
  std::vector<std::vector<double>> mu_b;  // Bernoulli reward means [context][action]
  SurrogateLoss loss;
  UserModel user;
  double epsilon = 0.0;  // feasibility tolerance of the constrained objective

  int n_contexts() const { return contexts.n_contexts; }
  int n_actions() const { return loss.n_actions; }
  int n_policies() const { return policies.n_policies(); }
};

// One round's observation. Exactly one of the two feedback modes is present:
// either a reward draw (xi=false), or the demonstrated action together with
// its full dissimilarity row and a forced zero reward (xi=true). z marks
// rounds deliberately spent on the revealing action, so z implies xi.
struct Feedback {
  int context = 0;
  int action = 0;
  double reward = 0.0;
  bool xi = false;
  bool z = false;
  std::optional<int> bar_a;
  std::optional<std::vector<double>> delta_row;  // loss(a, bar_a) for all a
};

/**
 * Plays one protocol round: with probability reveal_prob[context][action]
 * the user reveals the demonstrated action (reward forced to 0), otherwise
 * a Bernoulli reward with mean mu_b[context][action] is observed.
 *
 * Draw order (fixed for reproducibility): revelation coin, then either the
 * demonstration draw or the reward coin.
 */
Feedback env_step(const Instance& instance, int context, int action, bool z,
                  SplitMix64& rng);

// Checks every structural invariant of an Instance and returns one message
// per violation, naming the invariant and the offending indices. An empty
// result means the instance is valid.
std::vector<std::string> validate_instance(const Instance& instance);

}  // namespace cbus
