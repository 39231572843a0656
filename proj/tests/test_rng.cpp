#include <doctest.h>

#include <cmath>
#include <vector>

#include "cbus/rng.hpp"

using cbus::SplitMix64;

TEST_SUITE("rng") {

TEST_CASE("identical seeds give identical streams") {
  SplitMix64 a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("doubles live in [0,1)") {
  SplitMix64 rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("next_below stays in range and hits every cell") {
  SplitMix64 rng(3);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) ++counts[rng.next_below(5)];
  for (int c : counts) CHECK(c > 800);  // 1000 expected per cell
}

TEST_CASE("categorical follows the weights") {
  SplitMix64 rng(11);
  const std::vector<double> p = {0.1, 0.6, 0.3};
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(p)];
  for (int i = 0; i < 3; ++i) {
    CHECK(std::fabs(counts[i] / double(n) - p[i]) < 0.01);
  }
}

TEST_CASE("degenerate bernoulli draws") {
  SplitMix64 rng(5);
  for (int i = 0; i < 100; ++i) {
    CHECK(rng.bernoulli(1.0));
    CHECK_FALSE(rng.bernoulli(0.0));
  }
}

}  // TEST_SUITE
