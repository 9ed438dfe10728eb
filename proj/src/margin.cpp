#include "erm/margin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace erm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGolden = 0.6180339887498949;

double golden_max(const std::function<double(double)>& h, double lo, double hi, double tol,
                  double* arg_out) {
  double a = lo, b = hi;
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = h(x1), f2 = h(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = h(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = h(x1);
    }
  }
  const double x = 0.5 * (a + b);
  if (arg_out) *arg_out = x;
  return h(x);
}

}  // namespace

MarginFunction MarginFunction::quadratic(double c) {
  if (!(c > 0.0)) throw ArgumentError("margin function: quadratic constant must be positive");
  MarginFunction g;
  g.quadratic_ = true;
  g.c_ = c;
  return g;
}

MarginFunction MarginFunction::tabulated(std::vector<double> us, std::vector<double> gs) {
  if (us.size() != gs.size() || us.size() < 2)
    throw ArgumentError("margin function: table needs at least 2 matched points");
  if (us.front() != 0.0 || gs.front() != 0.0)
    throw ArgumentError("margin function: table must start at (0, 0)");
  for (std::size_t i = 1; i < us.size(); ++i)
    if (!(us[i] > us[i - 1]) || !(gs[i] > gs[i - 1]))
      throw ArgumentError("margin function: table must be strictly increasing");
  MarginFunction g;
  g.quadratic_ = false;
  g.us_ = std::move(us);
  g.gs_ = std::move(gs);
  return g;
}

double MarginFunction::operator()(double u) const {
  if (u < 0.0) throw ArgumentError("margin function: argument must be nonnegative");
  if (quadratic_) return u * u / (2.0 * c_ * c_);
  if (u > us_.back() * (1.0 + 1e-12))
    throw ArgumentError("margin function: argument beyond the tabulated range");
  const auto it = std::lower_bound(us_.begin(), us_.end(), u);
  if (it == us_.begin()) return gs_.front();
  const std::size_t hi = std::min<std::size_t>(it - us_.begin(), us_.size() - 1);
  const std::size_t lo = hi - 1;
  const double w = (u - us_[lo]) / (us_[hi] - us_[lo]);
  return gs_[lo] + w * (gs_[hi] - gs_[lo]);
}

double MarginFunction::inverse(double y) const {
  if (y < 0.0) throw ArgumentError("margin function: inverse argument must be nonnegative");
  if (quadratic_) return c_ * std::sqrt(2.0 * y);
  if (y > gs_.back() * (1.0 + 1e-12))
    throw ArgumentError("margin function: inverse argument beyond the tabulated range");
  double lo = 0.0, hi = us_.back();
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((*this)(mid) >= y ? hi : lo) = mid;
  }
  return hi;
}

double MarginFunction::conjugate(double v) const {
  if (quadratic_) return c_ * c_ * v * v / 2.0;
  double best = -kInf;
  // The table is piecewise linear, so the sup over each knot is exact.
  for (std::size_t i = 0; i < us_.size(); ++i) best = std::max(best, v * us_[i] - gs_[i]);
  return best;
}

double MarginFunction::max_u() const { return quadratic_ ? kInf : us_.back(); }

ConjugateResult fenchel_conjugate(const std::function<double(double)>& fn, double v, double lo,
                                  double hi) {
  if (!(v > 0.0)) throw ArgumentError("fenchel conjugate: v must be positive");
  if (!(hi > lo)) throw ArgumentError("fenchel conjugate: empty search interval");
  auto h = [&](double u) { return v * u - fn(u); };
  ConjugateResult out;
  out.value = golden_max(h, lo, hi, 1e-10, &out.argmax);
  const double width = hi - lo;
  out.boundary = (out.argmax - lo <= 1e-6 * width) || (hi - out.argmax <= 1e-6 * width);
  // The ends themselves can beat the interior when fn is steep.
  const double at_lo = h(lo), at_hi = h(hi);
  if (at_lo > out.value) {
    out.value = at_lo;
    out.argmax = lo;
    out.boundary = true;
  }
  if (at_hi > out.value) {
    out.value = at_hi;
    out.argmax = hi;
    out.boundary = true;
  }
  return out;
}

double IndexFunction::operator()(double s) const {
  if (s < tau_min) throw ArgumentError("index function: argument below tau_min");
  return amplitude * std::pow(s - tau_min, power);
}

double IndexFunction::inverse(double u) const {
  if (u < 0.0) throw ArgumentError("index function: inverse argument must be nonnegative");
  return tau_min + std::pow(u / amplitude, 1.0 / power);
}

PhiR0Result phi_and_r0(const IndexFunction& J, double m_n, double K, double C) {
  if (!(J.amplitude > 0.0) || !(J.power > 0.0))
    throw ArgumentError("phi_and_r0: index function must be strictly increasing");
  if (!(m_n > 0.0) || !(K > 0.0) || !(C > 0.0))
    throw ArgumentError("phi_and_r0: m_n, K, C must be positive");

  PhiR0Result out;
  out.phi = [J](double u) {
    const double s = J.inverse(u);
    return s * s;
  };

  const double v = 4.0 * K / (m_n * C * C);

  // Expand the search interval until the objective v u - Phi(u) turns over,
  // then verify strict midpoint convexity of Phi on it.
  double u_hi = 1.0;
  auto h = [&](double u) { return v * u - out.phi(u); };
  for (int it = 0; it < 200 && h(u_hi) >= h(0.5 * u_hi); ++it) u_hi *= 2.0;
  const int grid = 129;
  std::vector<double> values(grid);
  for (int i = 0; i < grid; ++i) values[i] = out.phi(u_hi * static_cast<double>(i) / (grid - 1));
  double scale = std::max(1.0, std::abs(values.back()));
  for (int i = 1; i + 1 < grid; ++i) {
    const double mid = values[i];
    const double avg = 0.5 * (values[i - 1] + values[i + 1]);
    if (!(mid < avg - 1e-14 * scale))
      throw ConditionViolation("phi_and_r0: Phi is not strictly convex");
  }

  ConjugateResult conj = fenchel_conjugate(out.phi, v, 0.0, u_hi);
  out.r0_sq = 2.0 * C * C * conj.value;
  out.r0 = std::sqrt(std::max(0.0, out.r0_sq));
  return out;
}

MarginCertificate check_margin(const RiskCurve& curve, double s0, const MarginFunction& G,
                               double delta_lower, MarginSide side) {
  const auto& s = curve.grid.points;
  const auto& v = curve.values;
  if (s.empty()) throw ArgumentError("check_margin: empty curve");
  std::size_t i0 = s.size();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (std::abs(s[i] - s0) <= 1e-9 * std::max(1.0, std::abs(s0))) {
      i0 = i;
      break;
    }
  if (i0 == s.size()) throw ArgumentError("check_margin: s0 is not a grid point");

  MarginCertificate cert;
  cert.s0 = s0;
  cert.delta_lower = delta_lower;
  cert.worst_margin = kInf;
  const double base = s0 * s0 - v[i0];
  const double se0 = curve.ses.empty() ? 0.0 : curve.ses[i0];
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == i0) continue;
    if (s[i] < s0 && side == MarginSide::RightOnly) continue;
    if (s[i] > s0 && s[i] <= s0 + delta_lower) continue;
    const double lhs = (s[i] * s[i] - v[i]) - base;
    const double margin = lhs - G(std::abs(s[i] - s0));
    const double se = curve.ses.empty() ? 0.0 : curve.ses[i];
    ++cert.tested_points;
    if (margin < cert.worst_margin) cert.worst_margin = margin;
    const double allowance = 3.0 * (se + se0) + 1e-12 * std::max(1.0, std::abs(lhs));
    if (margin < -allowance && !cert.counterexample_s) {
      cert.pass = false;
      cert.counterexample_s = s[i];
    }
  }
  if (cert.tested_points == 0) cert.worst_margin = 0.0;
  return cert;
}

double quadratic_margin_constant(double q, double M) {
  if (!(q > 1.0 && q <= 2.0))
    throw ArgumentError("quadratic margin constant: q must lie in (1,2]");
  if (!(M > 0.0)) throw ArgumentError("quadratic margin constant: M must be positive");
  const double exponent = -2.0 * (2.0 - q) / q;
  return std::sqrt((2.0 / q) * (q - 1.0) * std::pow(M + 1.0, exponent));
}

ConcaveGapResult approx_concave_gap(double eps, double M, double s0) {
  if (eps < 0.0) throw ArgumentError("approx concave gap: eps must be nonnegative");
  ConcaveGapResult out;
  const double root = std::sqrt(eps);
  out.delta_lower = 2.0 * std::sqrt(root * (2.0 * root * M + 1.0)) * s0;
  out.admissible = root * (1.0 + eps) < 0.5;
  return out;
}

double default_deviation_constant(double C, double K) { return 4.0 * (C + 1.0) + 2.0 * (K + 1.0); }

double delta_bound(double t, double n, double tau_max, double s0, double r0,
                   const MarginFunction& G, double C, double K, std::optional<double> c0) {
  if (!(n >= 1.0)) throw ArgumentError("delta bound: n must be at least 1");
  if (t < 0.0 || tau_max < 0.0 || s0 < 0.0 || r0 < 0.0)
    throw ArgumentError("delta bound: t, tau_max, s0, r0 must be nonnegative");
  const double a = c0 ? *c0 : default_deviation_constant(C, K);
  const double u = t + std::log(1.0 + std::sqrt(n * tau_max * tau_max));
  const double ratio = std::sqrt(u / n);
  const double rhs = G.conjugate(a * ratio) + a * ((s0 + r0) * ratio + u / n);
  return G.inverse(rhs);
}

double delta_bound_shifted(double t, double n, double tau_max, double tau_star, double s_star,
                           double r_star, const MarginFunction& G, double C, double K,
                           double gamma, std::optional<double> c0) {
  if (!std::isfinite(gamma) || !(gamma > 0.0))
    throw ConditionViolation("shifted delta bound: Gamma must be finite and positive");
  const double shifted_sq = tau_max * tau_max - tau_star * tau_star;
  if (shifted_sq < 0.0)
    throw ArgumentError("shifted delta bound: tau_star exceeds tau_max");
  return delta_bound(t, n, std::sqrt(shifted_sq), s_star, r_star, G, gamma * C, K, c0);
}

BoundInterval klein_rio_interval(double K, double sigma_s_sq, double E_s, double t, double n) {
  if (!(n >= 1.0)) throw ArgumentError("klein-rio interval: n must be at least 1");
  if (K < 0.0 || sigma_s_sq < 0.0 || E_s < 0.0 || t < 0.0)
    throw ArgumentError("klein-rio interval: arguments must be nonnegative");
  const double dev = std::sqrt(8.0 * K * E_s + 2.0 * sigma_s_sq) * std::sqrt(t / n);
  BoundInterval out;
  out.lower = E_s - dev - K * t / n;
  out.upper = E_s + dev + 2.0 * K * t / (3.0 * n);
  return out;
}

BoundInterval curvature_interval(double C, double s, double r0, double K, double E_s, double t,
                                 double n) {
  if (!(n >= 1.0)) throw ArgumentError("curvature interval: n must be at least 1");
  if (C < 0.0 || s < 0.0 || r0 < 0.0 || K < 0.0 || E_s < 0.0 || t < 0.0)
    throw ArgumentError("curvature interval: arguments must be nonnegative");
  const double chain_rhs = 2.0 * C * C * s * s + r0 * r0;
  if (8.0 * K * E_s > chain_rhs * (1.0 + 1e-12) + 1e-15)
    throw ConditionViolation("curvature interval: 8 K E(s) exceeds 2 C^2 s^2 + r0^2");
  const double ratio = std::sqrt(t / n);
  BoundInterval out;
  out.lower = E_s - 2.0 * C * s * ratio + r0 * ratio - K * t / n;
  out.upper = E_s + 2.0 * C * s * ratio + r0 * ratio + 2.0 * K * t / (3.0 * n);
  return out;
}

EnvelopeBounds envelope_interval(double c_F, double C_F, double sigma_s_sq, double E_s, double t,
                                 double n, bool verbatim) {
  if (!(c_F >= 1.0) || !(C_F >= 1.0))
    throw ArgumentError("envelope interval: c_F and C_F must be at least 1");
  if (n < 3.0) throw ArgumentError("envelope interval: n must be at least 3");
  if (sigma_s_sq < 0.0 || E_s < 0.0 || t < 0.0)
    throw ArgumentError("envelope interval: arguments must be nonnegative");
  const double log_n = std::log(n);
  const double root_log = std::sqrt(log_n);
  const double ratio = std::sqrt(t / n);
  EnvelopeBounds out;
  out.t0 = C_F * root_log;
  const double dev_low =
      std::sqrt(8.0 * C_F * root_log * (E_s + 2.0 * c_F * (c_F + t) / n) + 2.0 * sigma_s_sq) *
      ratio;
  out.lower = E_s - dev_low - C_F * t * root_log / n - c_F * (4.0 * c_F + t) / n;
  const double dev_up =
      std::sqrt(8.0 * C_F * root_log * (E_s + 2.0 * c_F * c_F / n) + 2.0 * sigma_s_sq) * ratio;
  if (verbatim) {
    out.upper = E_s - dev_up - 2.0 * C_F * t * root_log / (3.0 * n) - c_F * (4.0 * c_F + t) / n;
  } else {
    out.upper = E_s + dev_up + 2.0 * C_F * t * root_log / (3.0 * n) + c_F * (4.0 * c_F + t) / n;
  }
  return out;
}

HelperCheckResult margin_helper_check(const MarginFunction& G, double a, double b, double c) {
  if (!(a > 0.0) || !(b > 0.0) || !(c > 0.0))
    throw ArgumentError("margin helper: a, b, c must be positive");
  HelperCheckResult out;
  out.hypothesis = G(a) >= G.conjugate(2.0 * b) + 2.0 * c;
  out.conclusion = G(a) - a * b - c >= -1e-12;
  return out;
}

}  // namespace erm
