#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "erm/common.hpp"
#include "erm/risk_curve.hpp"

namespace erm {

// Margin function G: strictly increasing, G(0) = 0. Quadratic kind is
// G(u) = u^2 / (2 c^2); tabulated kind interpolates a convex increasing table
// linearly.
class MarginFunction {
 public:
  static MarginFunction quadratic(double c);
  // us must start at 0 with gs[0] = 0; both strictly increasing.
  static MarginFunction tabulated(std::vector<double> us, std::vector<double> gs);

  double operator()(double u) const;
  // Smallest u with G(u) >= y; bisection at 1e-10, closed form when quadratic.
  double inverse(double y) const;
  // G*(v) = sup_u { v u - G(u) }; closed form when quadratic.
  double conjugate(double v) const;

  bool is_quadratic() const { return quadratic_; }
  double constant() const { return c_; }
  // Upper end of the tabulated domain; +inf for quadratic.
  double max_u() const;

 private:
  MarginFunction() = default;
  bool quadratic_ = true;
  double c_ = 1.0;
  std::vector<double> us_, gs_;
};

struct ConjugateResult {
  double value = 0.0;
  double argmax = 0.0;
  bool boundary = false;  // sup attained at an interval end: widen the interval
};

// sup over [lo, hi] of { v u - fn(u) } by golden-section search, u refined to
// 1e-10. fn must be convex on the interval.
ConjugateResult fenchel_conjugate(const std::function<double(double)>& fn, double v, double lo,
                                  double hi);

// J(s) = amplitude * (s - tau_min)^power, strictly increasing from
// J(tau_min) = 0; the index function whose inverse squares to Phi.
struct IndexFunction {
  double amplitude = 1.0;
  double power = 1.0;
  double tau_min = 0.0;

  double operator()(double s) const;
  double inverse(double u) const;
};

struct PhiR0Result {
  std::function<double(double)> phi;  // Phi(u) = [J^{-1}(u)]^2
  double r0_sq = 0.0;                 // 2 C^2 Phi*(4K / (m_n C^2))
  double r0 = 0.0;
};

// Throws ConditionViolation when Phi fails a strict midpoint convexity check
// on a grid around the conjugate evaluation point.
PhiR0Result phi_and_r0(const IndexFunction& J, double m_n, double K, double C);

struct MarginCertificate {
  bool pass = true;
  double s0 = 0.0;
  double delta_lower = 0.0;
  std::optional<double> counterexample_s;
  // min over tested points of [s^2 - E(s)] - [s0^2 - E(s0)] - G(|s - s0|),
  // before the 3 SE allowance.
  double worst_margin = 0.0;
  std::size_t tested_points = 0;
};

enum class MarginSide { Both, RightOnly };

// Verifies [s^2 - E(s)] - [s0^2 - E(s0)] >= G(|s - s0|) at every grid point
// left of s0 and right of s0 + delta_lower; Monte Carlo curves fail only when
// the violation exceeds 3 combined standard errors.
MarginCertificate check_margin(const RiskCurve& curve, double s0, const MarginFunction& G,
                               double delta_lower, MarginSide side = MarginSide::Both);

// c = sqrt( (2/q)(q-1) (M+1)^{-2(2-q)/q} ); equals 1 at q = 2.
double quadratic_margin_constant(double q, double M);

struct ConcaveGapResult {
  double delta_lower = 0.0;
  bool admissible = false;  // sqrt(eps) (1 + eps) < 1/2
};

// delta = 2 [ sqrt(eps) (2 sqrt(eps) M + 1) ]^{1/2} s0.
ConcaveGapResult approx_concave_gap(double eps, double M, double s0);

// Default aggregate constant 4(C+1) + 2(K+1) when c0 is not supplied.
double default_deviation_constant(double C, double K);

// Smallest delta with
//   G(delta) >= G*(c0 sqrt(u/n)) + c0 ((s0 + r0) sqrt(u/n) + u/n),
// where u = t + log(1 + sqrt(n tau_max^2)).
double delta_bound(double t, double n, double tau_max, double s0, double r0,
                   const MarginFunction& G, double C, double K,
                   std::optional<double> c0 = std::nullopt);

// Same bound after the shift: tau_max^2 -> tau_max^2 - tau_star^2, s0 -> s_star,
// r0 -> r_star, and C -> Gamma C.
double delta_bound_shifted(double t, double n, double tau_max, double tau_star, double s_star,
                           double r_star, const MarginFunction& G, double C, double K,
                           double gamma, std::optional<double> c0 = std::nullopt);

struct BoundInterval {
  double lower = 0.0;
  double upper = 0.0;
};

// lower/upper = E_s -/+ sqrt(8 K E_s + 2 sigma_s^2) sqrt(t/n) - Kt/n | + 2Kt/(3n).
BoundInterval klein_rio_interval(double K, double sigma_s_sq, double E_s, double t, double n);

// Bounds with E(s) replaced by the curvature bound: the lower bound keeps the
// published "+ r0 sqrt(t/n)" term as displayed. Throws ConditionViolation when
// 8 K E_s > 2 C^2 s^2 + r0^2 (inputs inconsistent with the curvature chain).
BoundInterval curvature_interval(double C, double s, double r0, double K, double E_s, double t,
                                 double n);

struct EnvelopeBounds {
  double lower = 0.0;
  double upper = 0.0;
  double t0 = 0.0;  // truncation level C_F sqrt(log n)
};

// Sub-Gaussian envelope bounds. The published upper bound has subtractive
// deviation terms; the default flips them to additive, verbatim=true keeps
// the display unchanged.
EnvelopeBounds envelope_interval(double c_F, double C_F, double sigma_s_sq, double E_s, double t,
                                 double n, bool verbatim = false);

struct HelperCheckResult {
  bool hypothesis = false;  // G(a) >= G*(2b) + 2c
  bool conclusion = false;  // G(a) - a b - c >= 0
};

HelperCheckResult margin_helper_check(const MarginFunction& G, double a, double b, double c);

}  // namespace erm
