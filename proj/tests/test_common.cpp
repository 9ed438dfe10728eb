#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "erm/common.hpp"

using namespace erm;

TEST_CASE("derive_seed is deterministic and spreads across streams") {
  CHECK(derive_seed(42, 0, 0) == derive_seed(42, 0, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t stream = 0; stream < 8; ++stream)
    for (std::uint64_t index = 0; index < 64; ++index) seen.insert(derive_seed(7, stream, index));
  CHECK(seen.size() == 8 * 64);
  CHECK(derive_seed(1, 0, 0) != derive_seed(2, 0, 0));
}

TEST_CASE("parallel_for covers every index exactly once for any worker count") {
  for (int workers : {1, 2, 5}) {
    std::vector<int> hits(257, 0);
    parallel_for(257, workers, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
  }
}

TEST_CASE("parallel_for result does not depend on the worker count") {
  auto fill = [](int workers) {
    std::vector<double> out(100, 0.0);
    parallel_for(100, workers, [&](std::size_t i) {
      std::mt19937_64 rng(derive_seed(9, 0, i));
      out[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    });
    return out;
  };
  CHECK(fill(1) == fill(4));
}

TEST_CASE("parallel_for propagates exceptions") {
  CHECK_THROWS_AS(parallel_for(16, 3,
                               [&](std::size_t i) {
                                 if (i == 7) throw ArgumentError("boom");
                               }),
                  ArgumentError);
}

TEST_CASE("log_sum_exp matches direct evaluation and survives large inputs") {
  std::vector<double> small{0.0, std::log(2.0), std::log(3.0)};
  CHECK(log_sum_exp(small) == doctest::Approx(std::log(6.0)).epsilon(1e-12));

  std::vector<double> big{1000.0, 1000.0 + std::log(2.0)};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(3.0)).epsilon(1e-12));
  CHECK(std::isfinite(log_sum_exp(big)));
}
