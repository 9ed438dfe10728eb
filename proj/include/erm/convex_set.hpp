#pragma once

#include <optional>

#include "erm/common.hpp"

namespace erm {

// Closed convex constraint sets with exact Euclidean projections.
class ConvexSet {
 public:
  enum class Kind { All, Box, Ball, WeightedBall, Simplex, L1Ball };

  static ConvexSet all(int dim);
  static ConvexSet box(Vector lo, Vector hi);
  static ConvexSet ball(Vector center, double radius);
  // { x : sum_j w_j (x_j - c_j)^2 <= r^2 }, w_j > 0
  static ConvexSet weighted_ball(Vector center, Vector weights, double radius);
  // { x : x_j >= 0, sum_j x_j = total }
  static ConvexSet simplex(int dim, double total);
  static ConvexSet l1_ball(Vector center, double radius);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }

  Vector project(const Vector& point) const;
  bool contains(const Vector& point, double tol = 1e-12) const;

  // Radius of a ball around `around` that contains the set; nullopt when unbounded.
  std::optional<double> bounding_radius(const Vector& around) const;

  const Vector& center() const { return center_; }
  double radius() const { return radius_; }
  const Vector& weights() const { return weights_; }
  const Vector& lower() const { return lo_; }
  const Vector& upper() const { return hi_; }

 private:
  ConvexSet(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  int dim_;
  Vector center_;
  Vector weights_;
  Vector lo_, hi_;
  double radius_ = 0.0;
  double total_ = 0.0;
};

}  // namespace erm
