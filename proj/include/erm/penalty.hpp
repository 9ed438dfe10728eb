#pragma once

#include <optional>

#include "erm/common.hpp"
#include "erm/convex_set.hpp"

namespace erm {

// I(g) = scale * sqrt(sum_j w_j g_j^2); empty weights mean w_j = 1.
struct Seminorm {
  Vector weights;
  double scale = 1.0;

  double operator()(const Vector& g) const;
  double squared(const Vector& g) const;
  // Per-coordinate quadratic coefficients of I(g)^2 (scale^2 * w_j).
  Vector quad_coeffs(int dim) const;

  static Seminorm l2() { return Seminorm{}; }
  static Seminorm scaled_l2(double s) { return Seminorm{Vector(), s}; }
  static Seminorm weighted(Vector w, double s = 1.0) { return Seminorm{std::move(w), s}; }
};

// pen(g), one of: 0, the indicator of a convex set, lambda^2 I(g)^2, or
// lambda^2 I(g)^q with q in (1,2].
class Penalty {
 public:
  enum class Kind { Zero, Indicator, Squared, Power };

  static Penalty zero();
  static Penalty indicator(ConvexSet set);
  static Penalty squared(double lambda, Seminorm norm);
  static Penalty power(double lambda, double q, Seminorm norm);

  Kind kind() const { return kind_; }
  double lambda() const { return lambda_; }
  double exponent() const { return q_; }
  const Seminorm& seminorm() const { return norm_; }
  const ConvexSet& indicator_set() const;

  double value(const Vector& g) const;

  // argmin_u ||u - v||^2 / (2 eta) + pen(u)
  Vector prox(const Vector& v, double eta) const;

  // Squared and Power penalties are C1; their gradients can join the smooth
  // part of a composite objective.
  bool differentiable() const { return kind_ == Kind::Squared || kind_ == Kind::Power; }
  Vector gradient(const Vector& g) const;
  // Lipschitz constant of the gradient when one exists (Squared only).
  std::optional<double> gradient_lipschitz(int dim) const;

 private:
  Penalty() = default;

  Kind kind_ = Kind::Zero;
  double lambda_ = 0.0;
  double q_ = 2.0;
  Seminorm norm_;
  std::optional<ConvexSet> set_;
};

}  // namespace erm
