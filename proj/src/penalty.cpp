#include "erm/penalty.hpp"

#include <cmath>
#include <limits>

namespace erm {

double Seminorm::squared(const Vector& g) const {
  double acc;
  if (weights.size() == 0) {
    acc = g.squaredNorm();
  } else {
    if (weights.size() != g.size()) throw ArgumentError("seminorm: weight size mismatch");
    acc = (weights.array() * g.array().square()).sum();
  }
  return scale * scale * acc;
}

double Seminorm::operator()(const Vector& g) const { return std::sqrt(squared(g)); }

Vector Seminorm::quad_coeffs(int dim) const {
  Vector c = weights.size() == 0 ? Vector::Ones(dim) : weights;
  if (c.size() != dim) throw ArgumentError("seminorm: weight size mismatch");
  return scale * scale * c;
}

Penalty Penalty::zero() { return Penalty(); }

Penalty Penalty::indicator(ConvexSet set) {
  Penalty p;
  p.kind_ = Kind::Indicator;
  p.set_ = std::move(set);
  return p;
}

Penalty Penalty::squared(double lambda, Seminorm norm) {
  if (lambda < 0) throw ArgumentError("penalty: negative weight");
  Penalty p;
  p.kind_ = Kind::Squared;
  p.lambda_ = lambda;
  p.norm_ = std::move(norm);
  return p;
}

Penalty Penalty::power(double lambda, double q, Seminorm norm) {
  if (lambda < 0) throw ArgumentError("penalty: negative weight");
  if (!(q > 1.0 && q <= 2.0)) throw ArgumentError("penalty: power exponent must lie in (1,2]");
  Penalty p;
  p.kind_ = Kind::Power;
  p.lambda_ = lambda;
  p.q_ = q;
  p.norm_ = std::move(norm);
  return p;
}

const ConvexSet& Penalty::indicator_set() const {
  if (!set_) throw ArgumentError("penalty: not an indicator");
  return *set_;
}

double Penalty::value(const Vector& g) const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Indicator:
      return set_->contains(g) ? 0.0 : std::numeric_limits<double>::infinity();
    case Kind::Squared:
      return lambda_ * lambda_ * norm_.squared(g);
    case Kind::Power:
      return lambda_ * lambda_ * std::pow(norm_(g), q_);
  }
  return 0.0;
}

Vector Penalty::prox(const Vector& v, double eta) const {
  if (eta <= 0) throw ArgumentError("prox: step must be positive");
  switch (kind_) {
    case Kind::Zero:
      return v;
    case Kind::Indicator:
      return set_->project(v);
    case Kind::Squared: {
      Vector c = norm_.quad_coeffs(static_cast<int>(v.size()));
      Vector out(v.size());
      for (int j = 0; j < v.size(); ++j) out[j] = v[j] / (1.0 + 2.0 * eta * lambda_ * lambda_ * c[j]);
      return out;
    }
    case Kind::Power: {
      // Radial fixed point: u_j(rho) = v_j / (1 + eta l^2 q rho^(q-2) c_j),
      // rho = I(u). The profile is strictly convex, so the root is the prox.
      double iv = norm_(v);
      if (iv == 0.0 || lambda_ == 0.0) return v;
      Vector c = norm_.quad_coeffs(static_cast<int>(v.size()));
      const double l2q = eta * lambda_ * lambda_ * q_;
      auto shrink = [&](double rho, Vector& out) {
        double f = l2q * std::pow(rho, q_ - 2.0);
        for (int j = 0; j < v.size(); ++j) out[j] = v[j] / (1.0 + f * c[j]);
      };
      Vector buf(v.size());
      double lo = 0.0, hi = iv;  // I(u(rho)) - rho is positive near 0, negative at iv
      for (int it = 0; it < 200 && (hi - lo) > 1e-12; ++it) {
        double mid = 0.5 * (lo + hi);
        shrink(mid, buf);
        (norm_(buf) > mid ? lo : hi) = mid;
      }
      shrink(0.5 * (lo + hi), buf);
      return buf;
    }
  }
  return v;
}

Vector Penalty::gradient(const Vector& g) const {
  switch (kind_) {
    case Kind::Zero:
      return Vector::Zero(g.size());
    case Kind::Indicator:
      throw ArgumentError("penalty: indicator has no gradient");
    case Kind::Squared: {
      Vector c = norm_.quad_coeffs(static_cast<int>(g.size()));
      return 2.0 * lambda_ * lambda_ * c.cwiseProduct(g);
    }
    case Kind::Power: {
      double rho = norm_(g);
      if (rho == 0.0) return Vector::Zero(g.size());
      Vector c = norm_.quad_coeffs(static_cast<int>(g.size()));
      double f = lambda_ * lambda_ * q_ * std::pow(rho, q_ - 2.0);
      return f * c.cwiseProduct(g);
    }
  }
  return Vector::Zero(g.size());
}

std::optional<double> Penalty::gradient_lipschitz(int dim) const {
  if (kind_ == Kind::Zero) return 0.0;
  if (kind_ == Kind::Squared) return 2.0 * lambda_ * lambda_ * norm_.quad_coeffs(dim).maxCoeff();
  return std::nullopt;
}

}  // namespace erm
