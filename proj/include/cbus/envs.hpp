#pragma once

#include <cstdint>

#include "cbus/core.hpp"

namespace cbus {

enum class UserStrategy { S1, S2 };

// Two-policy hard family realizing the reward/fidelity exploration trade-off.
// `c` is the effective reward gap between the two policies, `gamma` the
// demonstration shift that separates the two user strategies.
struct LowerBoundParams {
  double c = 0.25;
  double gamma = 0.1;
  UserStrategy strategy = UserStrategy::S2;
};

enum class GeneratorKind { lower_bound, random, triggered, massart, aligned };

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::random;
  int n_contexts = 4;
  int K = 2;
  int n_policies = 4;
  double nu = 0.0;           // triggered: slack of withheld feedback
  double tau = 0.0;          // massart: margin of the constraint minimizer
  bool weak_margin = false;  // massart: dichotomy form instead of pointwise
  double alpha = 1.0;        // aligned: target affine slope
  double dfrak = 0.0;        // aligned: target similarity defect
  double epsilon = 0.0;      // instance feasibility tolerance
  std::uint64_t seed = 0;
  LowerBoundParams lb;
};

/**
 * Two sign-class contexts with probability 1/2 each, two actions, and the
 * two policies pi_1 (sign-matching, reward-optimal) and pi_2 (sign-opposed,
 * demonstration-optimal under S2). The dissimilarity is 0 on the positive
 * class and the mismatch indicator on the negative class. Under S1 the
 * demonstration is uniform; under S2 it lands on pi_2's action with
 * probability 1/2 + gamma.
 *
 * Revelation is certain except for pi_1's action on the negative class; the
 * raw reward mean there is 2c so the effective reward gap is exactly c.
 * Because of that fold, c must lie in (0, 1/2].
 *
 * epsilon < 0 selects the default gamma/2, which keeps pi_1 infeasible
 * under S2.
 */
Instance make_lower_bound(const LowerBoundParams& params, double epsilon = -1.0);

// Uniform contexts, random Bernoulli means, and a dissimilarity built from
// random points on the unit interval (so symmetry and the triangle
// inequality hold by construction). Revelation probabilities are uniform
// except for the revealing action's column.
Instance make_random(const GeneratorSpec& spec, SplitMix64& rng);

// Like make_random, but the demonstrated action is deterministic per context
// and a random subset of actions is clustered within `nu` of it; revelation
// is then forced wherever the played action would be more than nu away from
// the demonstration. The result carries the trigger_slack tag.
Instance make_triggered(const GeneratorSpec& spec, SplitMix64& rng);

// Instance with a designated constraint minimizer pibar whose action is
// isolated by at least epsilon + tau from every other action in every
// context (pointwise margin). With weak_margin, every other policy instead
// either has expected excess >= 3 epsilon + tau or is pointwise within
// (2 epsilon + tau)/4 of pibar. Throws when the margin cannot fit in [0,1].
Instance make_massart(const GeneratorSpec& spec, SplitMix64& rng);

// Instance whose dissimilarity distribution is certified (alpha, d')-similar
// to the reward distribution with d' <= spec.dfrak: the per-action embedding
// point is an affine distortion alpha * (1 - effective reward) plus bounded
// noise, and the demonstration sits at the per-context minimum point.
// Requires alpha in (0, 1]; throws if certification fails.
Instance make_aligned(const GeneratorSpec& spec, SplitMix64& rng);

// Dispatch on spec.kind with a generator seeded from spec.seed.
Instance make_instance(const GeneratorSpec& spec);

}  // namespace cbus
