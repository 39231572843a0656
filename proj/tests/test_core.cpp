#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <set>

#include "cbus/core.hpp"
#include "cbus/oracle.hpp"
#include "test_util.hpp"

using namespace cbus;
using cbus_test::tiny_instance;

TEST_SUITE("core") {

TEST_CASE("policy class rejects malformed tables") {
  CHECK_THROWS_AS(PolicyClass(2, 2, 2, {0, 1, 0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(PolicyClass(1, 2, 2, {0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(PolicyClass(1, 2, 2, {0}), std::invalid_argument);
}

TEST_CASE("revealing action always returns the demonstration") {
  const Instance inst = tiny_instance();
  SplitMix64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const int x = rng.next_below(2);
    const Feedback fb = env_step(inst, x, 0, i % 2 == 0, rng);
    CHECK(fb.xi);
    CHECK(fb.reward == 0.0);
    REQUIRE(fb.bar_a.has_value());
    REQUIRE(fb.delta_row.has_value());
    CHECK(fb.delta_row->size() == 3);
  }
}

TEST_CASE("never-revealing deterministic reward") {
  Instance inst = tiny_instance();
  inst.user.reveal_prob[0][2] = 0.0;
  inst.mu_b[0][2] = 1.0;
  SplitMix64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Feedback fb = env_step(inst, 0, 2, false, rng);
    CHECK_FALSE(fb.xi);
    CHECK(fb.reward == 1.0);
  }
}

TEST_CASE("feedback invariants hold on every step") {
  const Instance inst = tiny_instance();
  SplitMix64 rng(3);
  for (int i = 0; i < 5000; ++i) {
    const int x = rng.next_below(2);
    const int a = rng.next_below(3);
    const Feedback fb = env_step(inst, x, a, false, rng);
    if (fb.xi) {
      CHECK(fb.reward == 0.0);
      REQUIRE(fb.bar_a.has_value());
      REQUIRE(fb.delta_row.has_value());
      CHECK(fb.delta_row->size() == 3);
      const int bar = *fb.bar_a;
      CHECK((*fb.delta_row)[bar] == inst.loss(x, bar, bar));
    } else {
      CHECK_FALSE(fb.bar_a.has_value());
      CHECK((fb.reward == 0.0 || fb.reward == 1.0));
    }
    CHECK_FALSE(fb.z);
  }
}

TEST_CASE("step is deterministic given the rng state") {
  const Instance inst = tiny_instance();
  SplitMix64 a(99), b(99);
  for (int i = 0; i < 300; ++i) {
    const Feedback fa = env_step(inst, 1, 2, false, a);
    const Feedback fb = env_step(inst, 1, 2, false, b);
    CHECK(fa.xi == fb.xi);
    CHECK(fa.reward == fb.reward);
    CHECK(fa.bar_a == fb.bar_a);
  }
}

TEST_CASE("out-of-range arguments are rejected") {
  const Instance inst = tiny_instance();
  SplitMix64 rng(0);
  CHECK_THROWS_AS(env_step(inst, 2, 0, false, rng), std::invalid_argument);
  CHECK_THROWS_AS(env_step(inst, 0, 3, false, rng), std::invalid_argument);
  CHECK_THROWS_AS(env_step(inst, 0, 1, true, rng), std::invalid_argument);
}

TEST_CASE("reveal frequency and reward mean match the model") {
  const Instance inst = tiny_instance();
  const int x = 0, a = 1;
  const double rho = inst.user.reveal_prob[x][a];
  const int n = 100000;
  SplitMix64 rng(17);
  long long reveals = 0;
  double reward_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Feedback fb = env_step(inst, x, a, false, rng);
    reveals += fb.xi;
    reward_sum += fb.reward;
  }
  const double freq = reveals / double(n);
  CHECK(std::fabs(freq - rho) <= 3.0 * std::sqrt(rho * (1 - rho) / n));
  const double mean_reward = effective_mean_reward(inst, x, a);
  const double se = std::sqrt(mean_reward * (1 - mean_reward) / n);
  CHECK(std::fabs(reward_sum / n - mean_reward) <= 3.0 * se + 1e-9);
}

TEST_CASE("validation accepts hand-built and generated instances") {
  CHECK(validate_instance(tiny_instance()).empty());
  CHECK(validate_instance(cbus_test::random_instance(5, 4, 12, 0.1, 21)).empty());
}

TEST_CASE("validation flags asymmetry") {
  Instance inst = tiny_instance();
  inst.loss.values[(0 * 3 + 0) * 3 + 1] = 0.3;
  inst.loss.values[(0 * 3 + 1) * 3 + 0] = 0.4;
  bool found = false;
  for (const auto& v : validate_instance(inst)) {
    if (v.find("symmetry") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("validation flags triangle violations") {
  Instance inst = tiny_instance();
  // loss(0,2) = 1.0 but loss(0,1) = loss(1,2) = 0.2.
  for (int x = 0; x < 2; ++x) {
    auto set = [&](int a, int b, double v) {
      inst.loss.values[(x * 3 + a) * 3 + b] = v;
      inst.loss.values[(x * 3 + b) * 3 + a] = v;
    };
    set(0, 1, 0.2);
    set(1, 2, 0.2);
    set(0, 2, 1.0);
  }
  bool found = false;
  for (const auto& v : validate_instance(inst)) {
    if (v.find("triangle") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("validation flags trigger-slack violations") {
  Instance inst = tiny_instance();
  inst.user.trigger_slack = 0.05;  // context 0 action 2 is 1.0 away, reveal 0
  bool found = false;
  for (const auto& v : validate_instance(inst)) {
    if (v.find("trigger slack") != std::string::npos) found = true;
  }
  CHECK(found);
}

}  // TEST_SUITE
