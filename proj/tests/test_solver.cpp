#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "erm/family.hpp"
#include "erm/solver.hpp"

using namespace erm;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Penalty ridge_n(double lambda, int n) {
  return Penalty::squared(lambda, Seminorm::scaled_l2(1.0 / std::sqrt(static_cast<double>(n))));
}

}  // namespace

TEST_CASE("least squares without penalty returns the observation exactly") {
  Vector y(3);
  y << 0.4, -1.7, 2.2;
  SolveResult res = solve_regularized_ls(y, Penalty::zero());
  CHECK(res.converged);
  CHECK((res.minimizer - y).norm() == 0.0);
  CHECK(res.residual <= 1e-9);
}

TEST_CASE("ridge lambda=1 gives the closed-form halving") {
  Vector y = vec2(2.0, 4.0);
  SolveResult res = solve_regularized_ls(y, ridge_n(1.0, 2));
  CHECK(res.converged);
  CHECK((res.minimizer - vec2(1.0, 2.0)).norm() <= 1e-12);
}

TEST_CASE("weighted ridge matches the per-coordinate closed form exactly") {
  Vector y(3);
  y << 1.0, -2.0, 3.0;
  Vector w(3);
  w << 1.0, 2.0, 4.0;
  const double lambda = 0.5;
  SolveResult res = solve_regularized_ls(y, Penalty::squared(lambda, Seminorm::weighted(w)));
  for (int j = 0; j < 3; ++j) {
    const double expect = y[j] / (1.0 + 3.0 * lambda * lambda * w[j]);
    CHECK(res.minimizer[j] == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("box-constrained least squares clips and matches a grid oracle") {
  Vector y = vec2(5.0, -3.0);
  Penalty box = Penalty::indicator(ConvexSet::box(Vector::Zero(2), Vector::Ones(2)));
  SolveResult res = solve_regularized_ls(y, box);
  CHECK((res.minimizer - vec2(1.0, 0.0)).norm() == 0.0);

  double best = 1e300;
  Vector arg = vec2(0, 0);
  const int steps = 1000;
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; j <= steps; ++j) {
      Vector g = vec2(static_cast<double>(i) / steps, static_cast<double>(j) / steps);
      const double val = (y - g).squaredNorm() / 2.0;
      if (val < best) {
        best = val;
        arg = g;
      }
    }
  }
  CHECK((res.minimizer - arg).lpNorm<Eigen::Infinity>() <= 1e-3 + 1e-12);
}

TEST_CASE("optimality residual is zero at the solution and large away from it") {
  Vector y = vec2(2.0, 4.0);
  CHECK(optimality_residual(y, y, Penalty::zero()) == 0.0);

  Penalty pen = ridge_n(1.0, 2);
  SolveResult res = solve_regularized_ls(y, pen);
  CHECK(optimality_residual(y, res.minimizer, pen) <= 1e-9);
  CHECK(optimality_residual(y, y, pen) >= 0.1);
}

TEST_CASE("solver objective is nonincreasing in the iteration budget") {
  // Quadratic smooth part with an l2-ball constraint, solved by backtracking.
  Matrix a(3, 3);
  a << 2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0;
  Vector b(3);
  b << 1.0, -2.0, 0.5;
  ConvexSet ball = ConvexSet::ball(Vector::Zero(3), 0.7);
  CompositeProblem prob;
  prob.smooth_value = [&](const Vector& g) { return 0.5 * (a * g - b).squaredNorm(); };
  prob.smooth_gradient = [&](const Vector& g) { return Vector(a.transpose() * (a * g - b)); };
  prob.prox = [&](const Vector& v, double) { return ball.project(v); };
  prob.nonsmooth_value = [](const Vector&) { return 0.0; };

  double prev = 1e300;
  for (int budget = 1; budget <= 12; ++budget) {
    SolverSettings s;
    s.max_iterations = budget;
    s.tolerance = 1e-14;
    SolveResult res = prox_gradient(prob, Vector::Zero(3), s);
    CHECK(res.objective <= prev + 1e-12);
    prev = res.objective;
  }

  SolverSettings full;
  full.max_iterations = 500;
  SolveResult res = prox_gradient(prob, Vector::Zero(3), full);
  CHECK(res.converged);
  CHECK(res.residual <= full.tolerance);
}

TEST_CASE("solver settings are validated") {
  CompositeProblem prob;
  prob.smooth_value = [](const Vector&) { return 0.0; };
  prob.smooth_gradient = [](const Vector& g) { return Vector(Vector::Zero(g.size())); };
  prob.prox = [](const Vector& v, double) { return v; };
  prob.nonsmooth_value = [](const Vector&) { return 0.0; };
  SolverSettings bad_tol;
  bad_tol.tolerance = 0.0;
  CHECK_THROWS_AS(prox_gradient(prob, Vector::Zero(1), bad_tol), ArgumentError);
  SolverSettings bad_iter;
  bad_iter.max_iterations = 0;
  CHECK_THROWS_AS(prox_gradient(prob, Vector::Zero(1), bad_iter), ArgumentError);
}

TEST_CASE("erm on a 1-d density family clips the stationary point") {
  // f_c = -g_c + ||g_c||^2/2 on the cosine basis: P_n f_c is quadratic in c
  // with stationary point c = mean of phi_1 over the data.
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(40);
  for (auto& x : xs) x = u(rng);
  const Dataset data = Dataset::scalars(xs);

  const double lo = -0.05, hi = 0.12;
  BasisDensityFamily family(1, Vector::Zero(1), ConvexSet::box(Vector::Constant(1, lo), Vector::Constant(1, hi)));
  family.register_g0(Vector::Zero(1));

  double mean_phi = 0.0;
  for (double x : xs) mean_phi += std::sqrt(2.0) * std::cos(M_PI * x);
  mean_phi /= static_cast<double>(xs.size());
  const double expect = std::clamp(mean_phi, lo, hi);

  SolveResult res = solve_erm(family, Penalty::zero(), data);
  CHECK(res.converged);
  CHECK(std::abs(res.minimizer[0] - expect) <= 1e-6);

  // Independent 1-d grid oracle over the interval.
  double best = 1e300, arg = lo;
  for (int k = 0; k <= 4000; ++k) {
    const double c = lo + (hi - lo) * static_cast<double>(k) / 4000.0;
    double acc = 0.0;
    for (double x : xs) {
      const double gc = 1.0 + c * std::sqrt(2.0) * std::cos(M_PI * x);
      acc += -gc + (1.0 + c * c) / 2.0;
    }
    acc /= static_cast<double>(xs.size());
    if (acc < best) {
      best = acc;
      arg = c;
    }
  }
  CHECK(std::abs(res.minimizer[0] - arg) <= (hi - lo) / 4000.0 + 1e-9);
}

TEST_CASE("a huge penalty weight drives the minimizer to the origin") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Observation> obs(20);
  for (auto& o : obs) {
    o.x = Vector(2);
    o.x << gauss(rng), gauss(rng);
  }
  const Dataset data(SampleKind::Vector, obs);
  GaussianMeanFamily family(Vector::Zero(2), ConvexSet::all(2));
  family.register_g0(Vector::Zero(2));
  SolveResult res = solve_erm(family, Penalty::squared(1e3, Seminorm::l2()), data);
  CHECK(res.converged);
  CHECK(res.minimizer.norm() <= 1e-4);
}

TEST_CASE("finite families are solved by exhaustive enumeration") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int members = 5, supports = 4;
  std::vector<Vector> params;
  for (int i = 0; i < members; ++i) params.push_back(Vector::Constant(1, static_cast<double>(i)));
  std::vector<double> support{0.0, 1.0, 2.0, 3.0};
  Matrix values(members, supports);
  for (int i = 0; i < members; ++i)
    for (int k = 0; k < supports; ++k) values(i, k) = u(rng);
  Vector probs = Vector::Constant(supports, 0.25);
  FiniteFamily family(params, support, values, probs);

  const Dataset data = Dataset::scalars({0.0, 1.0, 1.0, 3.0, 2.0});
  const Penalty pen = Penalty::squared(0.3, Seminorm::l2());
  SolveResult res = solve_erm(family, pen, data);

  double best = 1e300;
  int arg = -1;
  for (int i = 0; i < members; ++i) {
    const double obj = family.member_empirical_mean(i, data) + pen.value(family.member(i));
    if (obj < best) {
      best = obj;
      arg = i;
    }
  }
  CHECK((res.minimizer - family.member(arg)).norm() == 0.0);
  CHECK(res.objective == doctest::Approx(best).epsilon(1e-15));
}

TEST_CASE("indicator penalty on a constrained domain is rejected") {
  std::vector<Observation> obs(3);
  for (auto& o : obs) o.x = Vector::Zero(2);
  const Dataset data(SampleKind::Vector, obs);
  GaussianMeanFamily family(Vector::Zero(2), ConvexSet::ball(Vector::Zero(2), 1.0));
  family.register_g0(Vector::Zero(2));
  Penalty pen = Penalty::indicator(ConvexSet::box(Vector::Zero(2), Vector::Ones(2)));
  CHECK_THROWS_AS(solve_erm(family, pen, data), UnsupportedScenario);
}
