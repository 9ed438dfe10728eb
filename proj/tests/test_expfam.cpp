#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "erm/expfam.hpp"

using namespace erm;

namespace {

ExpFamily rademacher_family(double p_plus = 0.5) {
  BaseMeasure base = BaseMeasure::discrete({-1.0, 1.0}, {1.0 - p_plus, p_plus});
  std::vector<std::function<double(double)>> stats{[](double x) { return x; }};
  return ExpFamily(std::move(base), std::move(stats),
                   ConvexSet::box(Vector::Constant(1, -6.0), Vector::Constant(1, 6.0)));
}

ExpFamily truncated_exponential_family() {
  BaseMeasure base = BaseMeasure::interval(0.0, 3.0, [](double x) { return std::exp(-x); });
  std::vector<std::function<double(double)>> stats{[](double x) { return x; }};
  return ExpFamily(std::move(base), std::move(stats),
                   ConvexSet::box(Vector::Constant(1, -8.0), Vector::Constant(1, 8.0)));
}

Vector one(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST_CASE("base measure integrates by node doubling until stable") {
  BaseMeasure base = BaseMeasure::interval(0.0, 3.0, [](double x) { return std::exp(-x); });
  const double z = 1.0 - std::exp(-3.0);
  CHECK(base.total_mass() == doctest::Approx(z).epsilon(1e-12));
  const double second = base.integrate([](double x) { return x * x; });
  CHECK(second == doctest::Approx(2.0 - 17.0 * std::exp(-3.0)).epsilon(1e-10));
  CHECK(base.last_node_count() == 128);

  BaseMeasure coin = BaseMeasure::discrete({0.0, 1.0}, {0.5, 0.5});
  CHECK(coin.log_integral_exp([](double x) { return 1000.0 * x; }) ==
        doctest::Approx(1000.0 + std::log(0.5)).epsilon(1e-12));

  CHECK_THROWS_AS(BaseMeasure::discrete({0.0}, {0.5, 0.5}), ArgumentError);
  CHECK_THROWS_AS(BaseMeasure::discrete({0.0}, {-1.0}), ArgumentError);
  CHECK_THROWS_AS(BaseMeasure::discrete({0.0}, {0.0}), ArgumentError);
  CHECK_THROWS_AS(BaseMeasure::interval(1.0, 1.0, [](double) { return 1.0; }), ArgumentError);
  CHECK_THROWS_AS(BaseMeasure::interval(0.0, 1.0, nullptr), ArgumentError);
}

TEST_CASE("symmetric two-point family has the log-cosh partition function") {
  ExpFamily fam = rademacher_family();
  CHECK(std::abs(fam.log_partition(one(0.0))) <= 1e-14);
  CHECK(fam.log_partition(one(1.0)) == doctest::Approx(std::log(std::cosh(1.0))).epsilon(1e-12));
  CHECK(fam.log_partition(one(-1.0)) == doctest::Approx(std::log(std::cosh(1.0))).epsilon(1e-12));
  CHECK(fam.base_mean_square(one(1.0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fam.sup_norm(one(0.7)) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(fam.log_partition_gradient(one(0.5))[0] ==
        doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
  CHECK_THROWS_AS(fam.log_partition(Vector::Zero(2)), ArgumentError);
}

TEST_CASE("exp family construction validates and supports centering overrides") {
  BaseMeasure base = BaseMeasure::discrete({-1.0, 1.0}, {0.3, 0.7});
  std::vector<std::function<double(double)>> stats{[](double x) { return x; }};
  CHECK_THROWS_AS(ExpFamily(base, {}, ConvexSet::all(0)), ArgumentError);
  CHECK_THROWS_AS(ExpFamily(base, stats, ConvexSet::all(2)), ArgumentError);

  ExpFamily centered(base, stats, ConvexSet::all(1));
  CHECK(centered.statistic(0, 1.0) == doctest::Approx(0.6).epsilon(1e-14));

  ExpFamily raw(base, stats, ConvexSet::all(1), false);
  CHECK(raw.statistic(0, 1.0) == 1.0);

  BaseMeasure uniform = BaseMeasure::discrete({-1.0, 1.0}, {0.5, 0.5});
  ExpFamily overridden(base, stats, ConvexSet::all(1), true, uniform);
  CHECK(overridden.statistic(0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("taylor ratio tends to one half at the symmetric family") {
  ExpFamily fam = rademacher_family();
  std::vector<double> grid;
  for (int k = 1; k <= 9; ++k) grid.push_back(1e-3 * k);
  for (int k = 1; k <= 9; ++k) grid.push_back(1e-2 * k);
  TaylorReport rep = taylor_ratio(fam, one(1.0), grid);
  REQUIRE(rep.rows.size() == grid.size());

  // At t = 1e-3 the partition value is a 5e-7 difference of 1e-3 terms, so
  // the achievable relative accuracy of the ratio is about 1e-9.
  for (const auto& row : rep.rows)
    CHECK(row.ratio == doctest::Approx(std::log(std::cosh(row.t)) / (row.t * row.t)).epsilon(1e-8));
  const auto& t01 = rep.rows[9 + 0];
  CHECK(t01.t == doctest::Approx(0.01));
  CHECK(std::abs(t01.ratio - 0.4999916669) <= 1e-6);
  CHECK(t01.deviation_rate == doctest::Approx(0.01 / 12.0).epsilon(1e-4));

  // kappa(t) = |ratio - 1/2| / t vanishes linearly here, so the two smallest
  // decades disagree by a factor of ten.
  CHECK_FALSE(rep.kappa_stable);
  CHECK(rep.kappa_next > 4.0 * rep.kappa_small);
}

TEST_CASE("asymmetric two-point family has a stable third-cumulant deviation rate") {
  ExpFamily fam = rademacher_family(0.7);
  CHECK(fam.base_mean_square(one(1.0)) == doctest::Approx(0.84).epsilon(1e-14));

  std::vector<double> grid;
  for (int k = 1; k <= 9; ++k) grid.push_back(1e-3 * k);
  for (int k = 1; k <= 9; ++k) grid.push_back(1e-2 * k);
  TaylorReport rep = taylor_ratio(fam, one(1.0), grid);
  CHECK(rep.kappa_stable);
  // |kappa_3| / (6 kappa_2) = 0.672 / 5.04 = 2/15.
  CHECK(std::abs(rep.rows.front().deviation_rate - 2.0 / 15.0) <= 1e-4);
  CHECK(std::abs(rep.kappa_small - 2.0 / 15.0) <= 2e-3);
  CHECK(std::abs(rep.kappa_next - 2.0 / 15.0) <= 6e-3);
}

TEST_CASE("taylor ratio rejects bad grids and degenerate directions") {
  ExpFamily fam = rademacher_family();
  CHECK_THROWS_AS(taylor_ratio(fam, one(1.0), {}), ArgumentError);
  CHECK_THROWS_AS(taylor_ratio(fam, one(1.0), {0.0}), ArgumentError);
  CHECK_THROWS_AS(taylor_ratio(fam, one(1.0), {1.5}), ArgumentError);
  CHECK_THROWS_AS(taylor_ratio(fam, one(0.0), {0.01}), ArgumentError);
}

TEST_CASE("truncated exponential family matches its closed-form partition function") {
  ExpFamily fam = truncated_exponential_family();
  const double z = 1.0 - std::exp(-3.0);
  const double off = (1.0 - 4.0 * std::exp(-3.0)) / z;
  auto closed = [&](double th) {
    return std::log((1.0 - std::exp(-3.0 * (1.0 - th))) / (1.0 - th)) - th * off;
  };
  for (double th : {-1.5, -0.3, 0.5, 0.9, 0.999}) {
    CHECK(fam.log_partition(one(th)) == doctest::Approx(closed(th)).epsilon(1e-9));
  }
  CHECK(fam.log_partition(one(1.0)) == doctest::Approx(std::log(3.0) - off).epsilon(1e-9));
  CHECK(fam.log_partition(one(0.0)) == doctest::Approx(std::log(z)).epsilon(1e-12));

  // Midpoint convexity of theta -> d(theta).
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = u(rng), b = u(rng);
    const double mid = fam.log_partition(one(0.5 * (a + b)));
    const double avg = 0.5 * (fam.log_partition(one(a)) + fam.log_partition(one(b)));
    CHECK(mid <= avg + 1e-10);
  }

  // Second difference of d at zero equals the centered second moment.
  const double h = 1e-3;
  const double curv =
      (fam.log_partition(one(h)) - 2.0 * fam.log_partition(one(0.0)) + fam.log_partition(one(-h))) /
      (h * h);
  const double psq = fam.base_mean_square(one(1.0));
  const double var_closed =
      (2.0 - 17.0 * std::exp(-3.0)) / z - off * off;
  CHECK(psq == doctest::Approx(var_closed).epsilon(1e-10));
  CHECK(curv == doctest::Approx(psq).epsilon(0.01));
}

TEST_CASE("small-norm expansion ratio approaches one quadratically") {
  ExpFamily fam = rademacher_family();
  std::vector<double> etas{0.01, 0.02, 0.04, 0.08, 0.16};
  ExpansionReport rep = small_norm_expansion(fam, one(1.0), etas);
  REQUIRE(rep.rows.size() == etas.size());
  CHECK(rep.rows.front().ratio == doctest::Approx(0.9999833339).epsilon(1e-5));
  for (const auto& row : rep.rows)
    CHECK(row.ratio ==
          doctest::Approx(std::log(std::cosh(row.eta)) / (row.eta * row.eta / 2.0)).epsilon(1e-10));
  CHECK(rep.fitted_slope >= 0.8);
  CHECK(rep.fitted_slope == doctest::Approx(2.0).epsilon(0.1));

  ExpansionReport mirror = small_norm_expansion(fam, one(-1.0), etas);
  for (std::size_t i = 0; i < etas.size(); ++i)
    CHECK(mirror.rows[i].ratio == doctest::Approx(rep.rows[i].ratio).epsilon(1e-14));

  CHECK_THROWS_AS(small_norm_expansion(fam, one(0.0), etas), ArgumentError);
  CHECK_THROWS_AS(small_norm_expansion(fam, one(1.0), {0.0}), ArgumentError);
}

TEST_CASE("density mle solves the moment equation") {
  ExpFamily fam = rademacher_family();
  std::vector<double> xs;
  for (int i = 0; i < 26; ++i) xs.push_back(1.0);
  for (int i = 0; i < 14; ++i) xs.push_back(-1.0);
  Dataset data = Dataset::scalars(xs);
  SolveResult fit = fit_density_mle(fam, data, Penalty::zero());
  REQUIRE(fit.converged);
  const double mean = 0.3;
  double lo = -6.0, hi = 6.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std::tanh(mid) < mean ? lo : hi) = mid;
  }
  CHECK(std::abs(fit.minimizer[0] - 0.5 * (lo + hi)) <= 1e-8);
  CHECK(std::abs(std::tanh(fit.minimizer[0]) - mean) <= 1e-6);

  SolveResult ridge = fit_density_mle(fam, data, Penalty::squared(1000.0, Seminorm::l2()));
  CHECK(std::abs(ridge.minimizer[0]) <= 1e-3);

  CHECK_THROWS_AS(
      fit_density_mle(fam, data, Penalty::indicator(ConvexSet::ball(Vector::Zero(1), 0.5))),
      UnsupportedScenario);
}

TEST_CASE("density mle concentrates near zero under the null") {
  ExpFamily fam = rademacher_family();
  int hits = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(9000 + static_cast<std::uint64_t>(seed));
    std::bernoulli_distribution coin(0.5);
    std::vector<double> xs;
    xs.reserve(10000);
    for (int i = 0; i < 10000; ++i) xs.push_back(coin(rng) ? 1.0 : -1.0);
    SolveResult fit = fit_density_mle(fam, Dataset::scalars(xs), Penalty::zero());
    if (fit.converged && std::abs(fit.minimizer[0]) <= 0.05) ++hits;
  }
  CHECK(hits >= 95);
}

TEST_CASE("exp-family regression matches closed forms for both links") {
  Vector y(4);
  y << 0.5, -1.0, 2.0, 0.0;
  RegressionResult gauss =
      fit_expfam_regression(y, ScalarLink::gaussian(), ConvexSet::all(4), Penalty::zero());
  REQUIRE(gauss.solve.converged);
  CHECK((gauss.solve.minimizer - y).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK_FALSE(gauss.clipped);

  Vector y1 = Vector::Constant(1, 1.0);
  RegressionResult expo = fit_expfam_regression(
      y1, ScalarLink::exponential(-2.0, 2.0),
      ConvexSet::box(Vector::Constant(1, -2.0), Vector::Constant(1, 2.0)), Penalty::zero());
  REQUIRE(expo.solve.converged);
  CHECK(std::abs(expo.solve.minimizer[0]) <= 1e-8);

  CHECK_THROWS_AS(
      fit_expfam_regression(Vector(), ScalarLink::gaussian(), ConvexSet::all(0), Penalty::zero()),
      ArgumentError);
  CHECK_THROWS_AS(
      fit_expfam_regression(y, ScalarLink::gaussian(), ConvexSet::all(3), Penalty::zero()),
      ArgumentError);
  CHECK_THROWS_AS(fit_expfam_regression(y, ScalarLink{}, ConvexSet::all(4), Penalty::zero()),
                  ArgumentError);
  CHECK_THROWS_AS(ScalarLink::exponential(2.0, -2.0), ArgumentError);
}
