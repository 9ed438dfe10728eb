#include "erm/convex_set.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace erm {

ConvexSet ConvexSet::all(int dim) { return ConvexSet(Kind::All, dim); }

ConvexSet ConvexSet::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size()) throw ArgumentError("box: bound sizes differ");
  if ((hi - lo).minCoeff() < 0) throw ArgumentError("box: empty (lo > hi)");
  ConvexSet s(Kind::Box, static_cast<int>(lo.size()));
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

ConvexSet ConvexSet::ball(Vector center, double radius) {
  if (radius < 0) throw ArgumentError("ball: negative radius");
  ConvexSet s(Kind::Ball, static_cast<int>(center.size()));
  s.center_ = std::move(center);
  s.radius_ = radius;
  return s;
}

ConvexSet ConvexSet::weighted_ball(Vector center, Vector weights, double radius) {
  if (center.size() != weights.size()) throw ArgumentError("weighted_ball: size mismatch");
  if (radius < 0) throw ArgumentError("weighted_ball: negative radius");
  if (weights.size() > 0 && weights.minCoeff() <= 0) {
    throw ArgumentError("weighted_ball: weights must be positive");
  }
  ConvexSet s(Kind::WeightedBall, static_cast<int>(center.size()));
  s.center_ = std::move(center);
  s.weights_ = std::move(weights);
  s.radius_ = radius;
  return s;
}

ConvexSet ConvexSet::simplex(int dim, double total) {
  if (dim <= 0 || total <= 0) throw ArgumentError("simplex: need dim > 0 and total > 0");
  ConvexSet s(Kind::Simplex, dim);
  s.total_ = total;
  return s;
}

ConvexSet ConvexSet::l1_ball(Vector center, double radius) {
  if (radius < 0) throw ArgumentError("l1_ball: negative radius");
  ConvexSet s(Kind::L1Ball, static_cast<int>(center.size()));
  s.center_ = std::move(center);
  s.radius_ = radius;
  return s;
}

namespace {

// Projection onto {x >= 0, sum x = total} by the sort-and-threshold rule.
Vector project_simplex(const Vector& v, double total) {
  const int d = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + d);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, theta = 0.0;
  int k = 0;
  for (int i = 0; i < d; ++i) {
    cum += u[i];
    double cand = (cum - total) / (i + 1);
    if (u[i] - cand > 0) {
      theta = cand;
      k = i + 1;
    }
  }
  (void)k;
  Vector out(d);
  for (int i = 0; i < d; ++i) out[i] = std::max(0.0, v[i] - theta);
  return out;
}

}  // namespace

Vector ConvexSet::project(const Vector& point) const {
  if (point.size() != dim_) throw ArgumentError("project: dimension mismatch");
  switch (kind_) {
    case Kind::All:
      return point;
    case Kind::Box:
      return point.cwiseMax(lo_).cwiseMin(hi_);
    case Kind::Ball: {
      Vector d = point - center_;
      double norm = d.norm();
      if (norm <= radius_) return point;
      if (norm == 0.0) return center_;
      return center_ + d * (radius_ / norm);
    }
    case Kind::WeightedBall: {
      Vector d = point - center_;
      double val = (weights_.array() * d.array().square()).sum();
      if (val <= radius_ * radius_) return point;
      if (radius_ == 0.0) return center_;
      // x = c + d ./ (1 + mu w); residual decreasing in mu, bisection.
      auto resid = [&](double mu) {
        double acc = 0.0;
        for (int j = 0; j < dim_; ++j) {
          double t = d[j] / (1.0 + mu * weights_[j]);
          acc += weights_[j] * t * t;
        }
        return acc - radius_ * radius_;
      };
      double lo = 0.0, hi = 1.0;
      while (resid(hi) > 0) hi *= 2.0;
      for (int it = 0; it < 200 && (hi - lo) > 1e-15 * std::max(1.0, hi); ++it) {
        double mid = 0.5 * (lo + hi);
        (resid(mid) > 0 ? lo : hi) = mid;
      }
      double mu = 0.5 * (lo + hi);
      Vector out(dim_);
      for (int j = 0; j < dim_; ++j) out[j] = center_[j] + d[j] / (1.0 + mu * weights_[j]);
      return out;
    }
    case Kind::Simplex:
      return project_simplex(point, total_);
    case Kind::L1Ball: {
      Vector d = point - center_;
      if (d.lpNorm<1>() <= radius_) return point;
      if (radius_ == 0.0) return center_;
      Vector abs = d.cwiseAbs();
      Vector proj = project_simplex(abs, radius_);
      Vector out(dim_);
      for (int j = 0; j < dim_; ++j) out[j] = center_[j] + std::copysign(proj[j], d[j]);
      return out;
    }
  }
  throw ArgumentError("project: unknown kind");
}

bool ConvexSet::contains(const Vector& point, double tol) const {
  if (point.size() != dim_) return false;
  switch (kind_) {
    case Kind::All:
      return true;
    case Kind::Box:
      return ((point - lo_).minCoeff() >= -tol) && ((hi_ - point).minCoeff() >= -tol);
    case Kind::Ball:
      return (point - center_).norm() <= radius_ + tol;
    case Kind::WeightedBall: {
      Vector d = point - center_;
      double val = (weights_.array() * d.array().square()).sum();
      return std::sqrt(std::max(0.0, val)) <= radius_ + tol;
    }
    case Kind::Simplex:
      return point.minCoeff() >= -tol && std::abs(point.sum() - total_) <= tol * dim_;
    case Kind::L1Ball:
      return (point - center_).lpNorm<1>() <= radius_ + tol;
  }
  return false;
}

std::optional<double> ConvexSet::bounding_radius(const Vector& around) const {
  switch (kind_) {
    case Kind::All:
      return std::nullopt;
    case Kind::Box: {
      double acc = 0.0;
      for (int j = 0; j < dim_; ++j) {
        double m = std::max(std::abs(lo_[j] - around[j]), std::abs(hi_[j] - around[j]));
        acc += m * m;
      }
      return std::sqrt(acc);
    }
    case Kind::Ball:
      return (around - center_).norm() + radius_;
    case Kind::WeightedBall:
      return (around - center_).norm() + radius_ / std::sqrt(weights_.minCoeff());
    case Kind::Simplex:
      return around.norm() + total_;
    case Kind::L1Ball:
      return (around - center_).norm() + radius_;
  }
  return std::nullopt;
}

}  // namespace erm
