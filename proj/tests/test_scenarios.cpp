#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "erm/common.hpp"
#include "erm/scenarios.hpp"

using namespace erm;

TEST_CASE("designed thresholds realize the target counting function") {
  const double a = 1.2, b = 0.32, gamma = 0.162, s_hi = 0.32, s_floor = 0.0115;
  std::vector<double> u = designed_thresholds(a, b, gamma, s_hi, s_floor);
  REQUIRE(u.size() > 50);
  for (std::size_t j = 0; j + 1 < u.size(); ++j) CHECK(u[j] >= u[j + 1]);
  CHECK(u.back() > 0.0);

  auto w = [&](double s) { return a + (b / gamma) * (std::pow(s, gamma) - 1.0); };
  auto count = [&](double s) { return w(s) * b * std::pow(s, gamma - 2.0); };
  for (int k = 0; k <= 20; ++k) {
    double s = s_floor * std::pow(s_hi / s_floor, k / 20.0);
    double observed = 0.0;
    for (double uj : u) {
      if (uj > s * s) observed += 1.0;
    }
    CHECK(std::abs(observed - count(s)) <= 1.5);
  }

  CHECK_THROWS_AS(designed_thresholds(0.0, b, gamma, s_hi, s_floor), ArgumentError);
  CHECK_THROWS_AS(designed_thresholds(a, b, 2.5, s_hi, s_floor), ArgumentError);
  CHECK_THROWS_AS(designed_thresholds(a, b, gamma, 0.01, 0.1), ArgumentError);
  CHECK_THROWS_AS(designed_thresholds(1.0, 3.0, 1.5, 1.0, 0.5), ArgumentError);
}

TEST_CASE("rate fit recovers an exact power law with zero jackknife width") {
  std::vector<double> ns{100.0, 400.0, 1600.0, 6400.0};
  std::vector<double> est;
  for (double n : ns) est.push_back(3.0 * std::pow(n, -0.25));
  RateReport rep = rate_fit(ns, est, {}, -0.25);
  CHECK(rep.slope == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(rep.slope_low == doctest::Approx(-0.25).epsilon(1e-10));
  CHECK(rep.slope_high == doctest::Approx(-0.25).epsilon(1e-10));
  CHECK(rep.target == -0.25);

  CHECK_THROWS_AS(rate_fit({100, 400, 1600}, {1, 2, 3}, {}, 0.0), ArgumentError);
  CHECK_THROWS_AS(rate_fit({100, 200, 400, 800}, {1, 1, 1, 1}, {}, 0.0), ArgumentError);
  CHECK_THROWS_AS(rate_fit(ns, {1, 0, 1, 1}, {}, 0.0), ArgumentError);
  CHECK_THROWS_AS(rate_fit({100, 100, 1600, 6400}, {1, 1, 1, 1}, {}, 0.0), ArgumentError);
  CHECK_THROWS_AS(rate_fit(ns, {1, 1, 1, 1}, {0.1, 0.1}, 0.0), ArgumentError);
}

TEST_CASE("projection config validation") {
  ProjectionConfig base;
  base.n_list = {250};
  base.replicates = 2;

  auto with = [&](auto&& mutate) {
    ProjectionConfig c = base;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) { c.case_id = 4; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) { c.alpha = 0.0; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) { c.alpha = 1.2; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) {
                    c.case_id = 3;
                    c.q = 2.5;
                  })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) {
                    c.case_id = 2;
                    c.lambda_scale = 0.0;
                  })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) { c.n_list = {}; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) { c.n_list = {3}; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) { c.n_list = {250, 250}; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) { c.replicates = 0; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) {
                    c.case_id = 2;
                    c.basis_dim = 8;
                    c.theta0 = Vector::Zero(3);
                  })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) {
                    c.basis_dim = 1;
                    c.theta0 = Vector::Constant(1, 10.0);
                  })),
                  ArgumentError);
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) { c.basis_dim = 100000; })),
                  ArgumentError);
  // Explicit grids must already start above tau_min.
  CHECK_THROWS_AS(run_projection_case(with([](ProjectionConfig& c) {
                    c.case_id = 2;
                    c.basis_dim = 8;
                    c.theta0 = Vector::Zero(8);
                    c.theta0[0] = 0.5;
                    c.grid = SGrid::geometric(0.01, 0.5, 1.1);
                  })),
                  ArgumentError);
}

TEST_CASE("one-dimensional ellipsoid case reduces to a clamp") {
  ProjectionConfig config;
  config.case_id = 1;
  config.basis_dim = 1;
  config.n_list = {250};
  config.replicates = 5;
  config.erm_replicates = 4;
  config.seed = 11;
  ProjectionResult result = run_projection_case(config);
  REQUIRE(result.per_n.size() == 1);
  REQUIRE(result.thresholds.size() == 1);
  const ProjectionPoint& point = result.per_n[0];
  CHECK(point.tau_min == 0.0);
  CHECK(point.mean_curve.grid.points.front() == doctest::Approx(0.020).epsilon(1e-12));
  CHECK(point.mean_curve.grid.points.back() == doctest::Approx(0.24).epsilon(1e-12));

  const double radius = std::sqrt(result.thresholds[0]);
  const double pi = std::acos(-1.0);
  for (std::size_t r = 0; r < 4; ++r) {
    std::mt19937_64 rng(derive_seed(11, 1, r));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double mean_phi = 0.0;
    for (int i = 0; i < 250; ++i) mean_phi += std::sqrt(2.0) * std::cos(pi * unif(rng));
    mean_phi /= 250.0;
    const double g_hat = std::clamp(mean_phi, -radius, radius);
    CHECK(point.tau_hat[r] == doctest::Approx(std::abs(g_hat) / std::sqrt(2.0)).epsilon(1e-7));
    CHECK(point.lemma_gap[r] == doctest::Approx(std::abs(point.tau_hat[r] - point.s_hat[r]))
                                    .epsilon(1e-12));
    CHECK(point.lemma_gap[r] <= 0.013 * point.s_hat[r] + 0.021);
  }

  const double edge = point.mean_curve.grid.points[1] + 1e-12;
  double near = 0.0;
  for (double s : point.s_hat) {
    if (s <= edge) near += 1.0;
  }
  CHECK(point.boundary_fraction == doctest::Approx(near / 4.0).epsilon(1e-12));
}

TEST_CASE("ellipsoid case argmin path shrinks with n") {
  ProjectionConfig config;
  config.case_id = 1;
  config.n_list = {250, 500};
  config.replicates = 24;
  config.erm_replicates = 8;
  config.seed = 7;
  ProjectionResult result = run_projection_case(config);
  REQUIRE(result.per_n.size() == 2);
  CHECK(result.thresholds.size() > 50);

  for (const auto& point : result.per_n) {
    CHECK(point.s0 > 0.020);
    CHECK(point.s0 < 0.24);
    CHECK(point.s0_se > 0.0);
    CHECK(point.majorant_constant > 0.0);
    double prev = -1.0;
    for (double v : point.mean_curve.values) {
      CHECK(v >= prev - 1e-12);
      CHECK(v >= 0.0);
      prev = v;
    }
    for (std::size_t r = 0; r < point.tau_hat.size(); ++r) {
      CHECK(point.lemma_gap[r] <= 0.013 * point.s_hat[r] + 0.021);
      CHECK(std::isfinite(point.deviation[r]));
    }
    CHECK(point.boundary_fraction <= 0.25);
  }
  CHECK(result.per_n[1].s0 < result.per_n[0].s0);
  double ratio = result.per_n[0].majorant_constant / result.per_n[1].majorant_constant;
  CHECK(ratio > 1.0 / 3.0);
  CHECK(ratio < 3.0);
}

TEST_CASE("strong ridge penalty pins the empirical argmin to the curve floor") {
  ProjectionConfig config;
  config.case_id = 2;
  config.basis_dim = 8;
  config.theta0 = Vector::Zero(8);
  config.theta0[0] = 0.5;
  config.lambda_scale = 1.0;
  config.lambda_exponent = 0.0;
  config.n_list = {400};
  config.replicates = 4;
  config.erm_replicates = 30;
  config.seed = 5;
  ProjectionResult result = run_projection_case(config);
  const ProjectionPoint& point = result.per_n[0];

  // min over c of (c - 1/2)^2 / 2 + c^2 is attained at c = 1/6 with value 1/12.
  CHECK(point.tau_min == doctest::Approx(std::sqrt(1.0 / 12.0)).epsilon(1e-9));
  CHECK(point.lambda == 1.0);
  CHECK(point.mean_curve.grid.points.front() ==
        doctest::Approx(point.tau_min * (1.0 + 1e-9)).epsilon(1e-12));
  for (double t : point.tau_hat) CHECK(t >= point.tau_min - 1e-9);
  CHECK(point.boundary_fraction > 0.9);
}

TEST_CASE("ridge projection argmin follows the designed decay rate") {
  ProjectionConfig config;
  config.case_id = 2;
  config.alpha = 1.0;
  config.lambda_scale = 1.0;
  config.lambda_exponent = -1.0 / 3.0;
  config.n_list = {250, 500, 1000, 2000, 4000, 8000};
  config.replicates = 48;
  config.seed = 2;
  ProjectionResult result = run_projection_case(config);
  REQUIRE(result.per_n.size() == 6);

  for (std::size_t i = 0; i < result.per_n.size(); ++i) {
    const auto& point = result.per_n[i];
    CHECK(point.lambda ==
          doctest::Approx(std::pow(static_cast<double>(point.n), -1.0 / 3.0)).epsilon(1e-12));
    CHECK(point.s0 > point.mean_curve.grid.points.front());
    CHECK(point.s0 < point.mean_curve.grid.points.back());
    if (i > 0) CHECK(point.s0 < result.per_n[i - 1].s0);
  }
  // s0 tracks sqrt(sum_j 1/(n (1/2 + lambda^2 j^2))) / 2 ~ n^(-1/2) lambda^(-1/2).
  CHECK(std::abs(result.rate.slope + 1.0 / 3.0) <= 0.05);
  CHECK(result.rate.slope_low <= result.rate.slope);
  CHECK(result.rate.slope_high >= result.rate.slope);

  double mc_min = result.per_n[0].majorant_constant;
  double mc_max = mc_min;
  for (const auto& point : result.per_n) {
    mc_min = std::min(mc_min, point.majorant_constant);
    mc_max = std::max(mc_max, point.majorant_constant);
  }
  CHECK(mc_max <= 5.0 * mc_min);
}

TEST_CASE("power penalty case runs end to end") {
  ProjectionConfig config;
  config.case_id = 3;
  config.q = 1.5;
  config.lambda_scale = 1.0;
  config.lambda_exponent = -1.0 / 6.0;
  config.basis_dim = 16;
  config.n_list = {300};
  config.replicates = 6;
  config.erm_replicates = 4;
  config.seed = 13;
  ProjectionResult result = run_projection_case(config);
  const ProjectionPoint& point = result.per_n[0];
  CHECK(point.lambda == doctest::Approx(std::pow(300.0, -1.0 / 6.0)).epsilon(1e-12));
  CHECK(point.tau_min == 0.0);
  CHECK(point.s0 > 0.0);
  CHECK(point.majorant_constant > 0.0);
  for (double v : point.mean_curve.values) CHECK(v >= 0.0);
  for (std::uint8_t f : point.mean_curve.flags) CHECK(f == 0);
  for (std::size_t r = 0; r < point.tau_hat.size(); ++r) {
    CHECK(std::isfinite(point.tau_hat[r]));
    CHECK(point.lemma_gap[r] <= 0.05 * point.s_hat[r] + 0.05);
  }
  CHECK(result.rate.target < 0.0);
}

TEST_CASE("linearized least squares matches the closed form without constraints") {
  LinearizedConfig config;
  config.dimension = 4;
  config.lambda = 0.0;
  config.l1_domain = false;
  config.n_list = {200};
  config.seed = 7;
  config.envelope_draws = 1000;
  LinearizedResult result = run_linearized_ls(config);
  REQUIRE(result.per_n.size() == 1);
  const LinearizedPoint& point = result.per_n[0];
  CHECK(point.closed_form_gap <= 1e-10);
  CHECK(point.holder_margin >= -1e-12);
  Vector diff = point.beta_hat - result.config.beta0;
  CHECK(point.tau_sq ==
        doctest::Approx(0.5 * diff.dot(result.config.sigma0 * diff)).epsilon(1e-12));
  CHECK(point.beta_error == doctest::Approx(diff.norm()).epsilon(1e-12));
  CHECK_FALSE(result.envelope.holds);
}

TEST_CASE("noiseless linearized regression recovers the truth on the l1 ball") {
  LinearizedConfig config;
  config.dimension = 5;
  config.lambda = 0.0;
  config.noise_sd = 0.0;
  config.l1_domain = true;
  config.n_list = {10000};
  config.seed = 3;
  config.envelope_draws = 1000;
  LinearizedResult result = run_linearized_ls(config);
  const LinearizedPoint& point = result.per_n[0];
  CHECK(point.beta_error <= 1e-2);
  CHECK(std::isnan(point.closed_form_gap));
  CHECK(point.holder_margin >= -1e-12);
  CHECK(result.envelope.holds);
  CHECK(result.envelope.big_c_f == 1.0);
}

TEST_CASE("envelope tail certificate holds against fresh draws") {
  LinearizedConfig config;
  config.dimension = 3;
  config.lambda = 0.0;
  config.noise_sd = 1.0;
  config.l1_domain = true;
  config.n_list = {60};
  config.seed = 21;
  config.envelope_draws = 200000;
  LinearizedResult result = run_linearized_ls(config);
  const EnvelopeCertificate& cert = result.envelope;
  // Default design: 3 Sigma0 = I, so K_X = 1 and K_0 = |beta0|_1 = 1.
  CHECK(cert.k_x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cert.k0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cert.big_c_f == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(cert.c_f >= 1.0);
  CHECK(cert.worst_ratio > 0.0);
  CHECK(cert.worst_ratio <= 1.0);
  CHECK(cert.holds);
  CHECK(result.per_n[0].holder_margin >= -1e-12);
}

TEST_CASE("linearized config validation") {
  LinearizedConfig base;
  base.n_list = {100};
  base.envelope_draws = 1000;
  auto with = [&](auto&& mutate) {
    LinearizedConfig c = base;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(run_linearized_ls(with([](LinearizedConfig& c) { c.dimension = 0; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_linearized_ls(with([](LinearizedConfig& c) { c.lambda = -1.0; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_linearized_ls(with([](LinearizedConfig& c) { c.noise_sd = -1.0; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_linearized_ls(with([](LinearizedConfig& c) { c.n_list = {}; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_linearized_ls(with([](LinearizedConfig& c) { c.n_list = {1}; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_linearized_ls(with([](LinearizedConfig& c) { c.n_list = {100, 100}; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_linearized_ls(with([](LinearizedConfig& c) { c.envelope_draws = 10; })),
                  ArgumentError);
  CHECK_THROWS_AS(run_linearized_ls(with([](LinearizedConfig& c) { c.beta0 = Vector::Zero(2); })),
                  ArgumentError);
  CHECK_THROWS_AS(
      run_linearized_ls(with([](LinearizedConfig& c) { c.sigma0 = Matrix::Identity(2, 2); })),
      ArgumentError);
  CHECK_THROWS_AS(run_linearized_ls(with([](LinearizedConfig& c) {
                    c.sigma0 = Matrix::Identity(5, 5);
                    c.sigma0(0, 1) = 0.5;
                  })),
                  ArgumentError);
  CHECK_THROWS_AS(
      run_linearized_ls(with([](LinearizedConfig& c) { c.sigma0 = Matrix::Zero(5, 5); })),
      ArgumentError);
}
