#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "erm/convex_set.hpp"
#include "erm/penalty.hpp"

using namespace erm;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector random_vector(std::mt19937_64& rng, int dim, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(dim);
  for (int j = 0; j < dim; ++j) v[j] = u(rng);
  return v;
}

}  // namespace

TEST_CASE("box projection clips coordinates") {
  auto box = ConvexSet::box(Vector::Zero(2), Vector::Ones(2));
  CHECK((box.project(vec2(2.0, -1.0)) - vec2(1.0, 0.0)).norm() == 0.0);
  CHECK((box.project(vec2(0.3, 0.7)) - vec2(0.3, 0.7)).norm() == 0.0);
}

TEST_CASE("ball projection rescales radially") {
  auto ball = ConvexSet::ball(Vector::Zero(2), 1.0);
  CHECK((ball.project(vec2(3.0, 4.0)) - vec2(0.6, 0.8)).norm() <= 1e-15);
  CHECK((ball.project(vec2(0.1, -0.2)) - vec2(0.1, -0.2)).norm() == 0.0);
}

TEST_CASE("simplex projection lands on the simplex and fixes members") {
  auto simplex = ConvexSet::simplex(3, 1.0);
  Vector p(3);
  p << 0.2, 0.3, 0.5;
  CHECK((simplex.project(p) - p).norm() <= 1e-12);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Vector x = random_vector(rng, 3, 3.0);
    Vector q = simplex.project(x);
    CHECK(q.minCoeff() >= -1e-12);
    CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(simplex.contains(q, 1e-9));
  }
}

TEST_CASE("l1 ball projection is exact against a dense dual scan") {
  auto set = ConvexSet::l1_ball(Vector::Zero(2), 1.0);
  // Projection of (1, 0.5) onto the unit l1 ball: soft-threshold at mu = 0.25.
  Vector got = set.project(vec2(1.0, 0.5));
  CHECK((got - vec2(0.75, 0.25)).norm() <= 1e-12);
  CHECK(std::abs(got.lpNorm<1>() - 1.0) <= 1e-12);
}

TEST_CASE("weighted ball projection satisfies the KKT conditions") {
  Vector w(2);
  w << 1.0, 4.0;
  auto set = ConvexSet::weighted_ball(Vector::Zero(2), w, 1.0);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    Vector x = random_vector(rng, 2, 4.0);
    Vector p = set.project(x);
    const double constraint = w[0] * p[0] * p[0] + w[1] * p[1] * p[1];
    CHECK(constraint <= 1.0 + 1e-9);
    if (constraint < 1.0 - 1e-9) {
      CHECK((p - x).norm() <= 1e-10);
    } else {
      // Stationarity: x - p parallel to the outward normal (w .* p).
      Vector normal = w.cwiseProduct(p);
      Vector gap = x - p;
      const double cross = normal[0] * gap[1] - normal[1] * gap[0];
      CHECK(std::abs(cross) <= 1e-7 * (1.0 + gap.norm() * normal.norm()));
      CHECK(gap.dot(normal) >= -1e-10);
    }
  }
}

TEST_CASE("projections are idempotent and nonexpansive") {
  std::mt19937_64 rng(13);
  Vector w(3);
  w << 0.5, 1.0, 2.0;
  std::vector<ConvexSet> sets = {
      ConvexSet::box(Vector::Constant(3, -1.0), Vector::Constant(3, 2.0)),
      ConvexSet::ball(Vector::Ones(3), 1.5),
      ConvexSet::weighted_ball(Vector::Zero(3), w, 2.0),
      ConvexSet::simplex(3, 1.0),
      ConvexSet::l1_ball(Vector::Zero(3), 1.0),
  };
  for (const auto& set : sets) {
    for (int trial = 0; trial < 500; ++trial) {
      Vector x = random_vector(rng, 3, 5.0);
      Vector y = random_vector(rng, 3, 5.0);
      Vector px = set.project(x);
      Vector py = set.project(y);
      CHECK((set.project(px) - px).norm() <= 1e-9);
      CHECK((px - py).norm() <= (x - y).norm() + 1e-10);
      CHECK(set.contains(px, 1e-8));
    }
  }
}

TEST_CASE("bounding radius covers sampled members") {
  Vector w(2);
  w << 1.0, 4.0;
  auto set = ConvexSet::weighted_ball(Vector::Zero(2), w, 1.0);
  auto radius = set.bounding_radius(Vector::Zero(2));
  REQUIRE(radius.has_value());
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    Vector p = set.project(random_vector(rng, 2, 3.0));
    CHECK(p.norm() <= *radius + 1e-9);
  }
  CHECK_FALSE(ConvexSet::all(2).bounding_radius(Vector::Zero(2)).has_value());
}

TEST_CASE("prox of a squared penalty shrinks in closed form") {
  // pen(u) = 0.5 ||u||^2 via lambda^2 = 0.5; prox factor 1/(1 + 2 eta c).
  Penalty pen = Penalty::squared(std::sqrt(0.5), Seminorm::l2());
  Vector v = vec2(1.0, 1.0);
  CHECK((pen.prox(v, 1.0) - vec2(0.5, 0.5)).norm() <= 1e-12);
}

TEST_CASE("prox of zero penalty is the identity, of an indicator the projection") {
  Penalty none = Penalty::zero();
  Vector v = vec2(2.0, -1.0);
  CHECK((none.prox(v, 0.7) - v).norm() == 0.0);

  Penalty box = Penalty::indicator(ConvexSet::box(Vector::Zero(2), Vector::Ones(2)));
  CHECK((box.prox(v, 0.3) - vec2(1.0, 0.0)).norm() == 0.0);
  CHECK((box.prox(v, 5.0) - vec2(1.0, 0.0)).norm() == 0.0);
}

TEST_CASE("prox rejects nonpositive steps") {
  Penalty pen = Penalty::squared(1.0, Seminorm::l2());
  CHECK_THROWS_AS(pen.prox(Vector::Ones(2), 0.0), ArgumentError);
  CHECK_THROWS_AS(pen.prox(Vector::Ones(2), -1.0), ArgumentError);
}

TEST_CASE("prox minimizes against random competitors") {
  std::mt19937_64 rng(15);
  std::vector<Penalty> pens = {
      Penalty::squared(0.8, Seminorm::l2()),
      Penalty::power(0.6, 1.5, Seminorm::l2()),
      Penalty::indicator(ConvexSet::ball(Vector::Zero(3), 1.0)),
      Penalty::zero(),
  };
  for (const auto& pen : pens) {
    for (int trial = 0; trial < 25; ++trial) {
      Vector v = random_vector(rng, 3, 2.0);
      const double eta = 0.2 + 0.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      Vector star = pen.prox(v, eta);
      const double best = (star - v).squaredNorm() / (2.0 * eta) + pen.value(star);
      REQUIRE(std::isfinite(best));
      for (int k = 0; k < 100; ++k) {
        Vector u = random_vector(rng, 3, 2.5);
        if (pen.kind() == Penalty::Kind::Indicator) u = pen.indicator_set().project(u);
        const double other = (u - v).squaredNorm() / (2.0 * eta) + pen.value(u);
        CHECK(other >= best - 1e-9);
      }
    }
  }
}

TEST_CASE("penalty values are convex along random chords") {
  std::mt19937_64 rng(16);
  Vector w(3);
  w << 1.0, 2.0, 0.5;
  std::vector<Penalty> pens = {
      Penalty::squared(0.7, Seminorm::weighted(w)),
      Penalty::power(0.9, 1.3, Seminorm::l2()),
      Penalty::power(0.9, 2.0, Seminorm::scaled_l2(0.4)),
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& pen : pens) {
    for (int trial = 0; trial < 200; ++trial) {
      Vector a = random_vector(rng, 3, 2.0);
      Vector b = random_vector(rng, 3, 2.0);
      const double t = unit(rng);
      const double lhs = pen.value(t * a + (1.0 - t) * b);
      CHECK(lhs <= t * pen.value(a) + (1.0 - t) * pen.value(b) + 1e-10);
    }
  }
}

TEST_CASE("power penalty prox matches a dense radial scan") {
  Penalty pen = Penalty::power(0.8, 1.5, Seminorm::l2());
  Vector v = vec2(1.2, -0.9);
  const double eta = 0.6;
  Vector star = pen.prox(v, eta);
  const double fstar = (star - v).squaredNorm() / (2.0 * eta) + pen.value(star);
  // The prox stays on the ray through v; scan radii densely.
  const double vnorm = v.norm();
  Vector dir = v / vnorm;
  double best = 1e300;
  for (int k = 0; k <= 200000; ++k) {
    const double r = vnorm * static_cast<double>(k) / 200000.0;
    Vector u = r * dir;
    best = std::min(best, (u - v).squaredNorm() / (2.0 * eta) + pen.value(u));
  }
  CHECK(fstar <= best + 1e-9);
  CHECK(fstar >= best - 1e-9);
}

TEST_CASE("empty or malformed sets are rejected") {
  CHECK_THROWS_AS(ConvexSet::box(Vector::Ones(2), Vector::Zero(2)), ArgumentError);
  CHECK_THROWS_AS(ConvexSet::ball(Vector::Zero(2), -1.0), ArgumentError);
  CHECK_THROWS_AS(ConvexSet::simplex(0, 1.0), ArgumentError);
}
