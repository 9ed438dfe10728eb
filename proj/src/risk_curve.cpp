#include "erm/risk_curve.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "erm/solver.hpp"

namespace erm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool nearly_diagonal(const Matrix& m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j && std::abs(m(i, j)) > 1e-14) return false;
  return true;
}

// maximize v . delta subject to sum a_j delta_j^2 + 2 b_j delta_j + c0 <= budget.
// Completing the square gives the exact maximizer.
struct QuadConstraint {
  Vector a;
  Vector b;
  double c0 = 0.0;

  double minimum() const {
    double m = c0;
    for (int j = 0; j < a.size(); ++j) m -= b[j] * b[j] / a[j];
    return m;
  }
};

InnerResult linear_over_quad(const Vector& v, const QuadConstraint& q, double budget) {
  const int k = static_cast<int>(v.size());
  Vector center(k);
  for (int j = 0; j < k; ++j) center[j] = -q.b[j] / q.a[j];
  const double slack = budget - q.minimum();
  if (slack < -1e-9 * std::max(1.0, std::abs(budget)))
    throw ArgumentError("inner maximization: budget below the constraint minimum");
  double weight = 0.0;
  for (int j = 0; j < k; ++j) weight += v[j] * v[j] / q.a[j];
  InnerResult out;
  out.converged = true;
  if (weight <= 0.0) {
    out.maximizer = center;
    out.value = v.dot(center);
    return out;
  }
  const double scale = std::sqrt(std::max(0.0, slack) / weight);
  Vector delta = center;
  for (int j = 0; j < k; ++j) delta[j] += scale * v[j] / q.a[j];
  out.maximizer = delta;
  out.value = v.dot(delta);
  return out;
}

// maximize v . delta subject to sum a1_j delta_j^2 <= c1 and
// sum a2_j delta_j^2 <= c2 (both centered). If neither single-constraint
// solution is feasible for the other constraint, both bind; the KKT direction
// is v / (a1 + t a2) and the multiplier ratio t solves a scalar equation.
InnerResult linear_over_two_quads(const Vector& v, const Vector& a1, double c1, const Vector& a2,
                                  double c2) {
  const int k = static_cast<int>(v.size());
  InnerResult out;
  out.converged = true;
  out.maximizer = Vector::Zero(k);
  if (c1 < -1e-15 || c2 < -1e-15)
    throw ArgumentError("inner maximization: negative constraint budget");
  if (v.norm() == 0.0 || c1 <= 0.0 || c2 <= 0.0) return out;

  auto single = [&](const Vector& a, double c) {
    double weight = 0.0;
    for (int j = 0; j < k; ++j) weight += v[j] * v[j] / a[j];
    Vector delta = Vector::Zero(k);
    const double scale = std::sqrt(c / weight);
    for (int j = 0; j < k; ++j) delta[j] = scale * v[j] / a[j];
    return delta;
  };
  auto form = [&](const Vector& a, const Vector& d) {
    double t = 0.0;
    for (int j = 0; j < k; ++j) t += a[j] * d[j] * d[j];
    return t;
  };

  Vector d1 = single(a1, c1);
  if (form(a2, d1) <= c2 * (1.0 + 1e-12)) {
    out.maximizer = d1;
    out.value = v.dot(d1);
    return out;
  }
  Vector d2 = single(a2, c2);
  if (form(a1, d2) <= c1 * (1.0 + 1e-12)) {
    out.maximizer = d2;
    out.value = v.dot(d2);
    return out;
  }

  // excess(t) > 0 iff the second constraint is violated after normalizing the
  // direction v-over-(a1 + t a2) to saturate the first; excess(0) > 0 and the
  // t -> infinity limit is negative because each single solution violates the
  // other constraint.
  Vector u(k);
  auto excess = [&](double t) {
    for (int j = 0; j < k; ++j) u[j] = v[j] / (a1[j] + t * a2[j]);
    return c1 * form(a2, u) / form(a1, u) - c2;
  };

  double hi = 1.0;
  bool bracketed = false;
  for (int it = 0; it < 500; ++it) {
    if (excess(hi) <= 0.0) {
      bracketed = true;
      break;
    }
    hi *= 2.0;
  }
  double lo = 0.0;
  if (bracketed) {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (excess(mid) > 0.0 ? lo : hi) = mid;
    }
  }
  const double t = 0.5 * (lo + hi);
  for (int j = 0; j < k; ++j) u[j] = v[j] / (a1[j] + t * a2[j]);
  const double norm1 = form(a1, u);
  Vector delta = std::sqrt(c1 / norm1) * u;
  out.maximizer = delta;
  out.value = v.dot(delta);
  out.converged = bracketed;
  return out;
}

// maximize v . delta subject to
//   sum d_j delta_j^2 + lambda2 * I(g0 + delta)^q <= budget,
// I(u) = sqrt(sum c_j u_j^2). For a fixed multiplier mu the Lagrangian is
// strictly concave, so its stationary point is unique; it is found by
// bisection on rho = I(g0 + delta). The outer multiplier is bisected on the
// constraint value, which is decreasing in mu.
struct PowerConstraint {
  Vector d;
  Vector c;
  double lambda2 = 0.0;
  double q = 1.5;
};

class PowerInner {
 public:
  PowerInner(const Vector& v, const PowerConstraint& r, const Vector& g0)
      : v_(v), r_(r), g0_(g0) {}

  // Constrained minimum of the budget form, from the large-mu limit.
  double constraint_minimum() const {
    Vector u = stationary_point(1e14);
    return constraint_value(u);
  }

  InnerResult solve(double budget) const {
    InnerResult out;
    out.converged = true;
    if (v_.norm() == 0.0) {
      Vector u = stationary_point(1e14);
      out.maximizer = u - g0_;
      out.value = 0.0;
      return out;
    }
    double mu_hi = 1.0;
    bool upper = false;
    for (int it = 0; it < 1200 && mu_hi < 1e290; ++it) {
      if (constraint_value(stationary_point(mu_hi)) < budget) {
        upper = true;
        break;
      }
      mu_hi *= 2.0;
    }
    double mu_lo = mu_hi;
    bool lower = false;
    for (int it = 0; it < 1200 && mu_lo > 1e-290; ++it) {
      mu_lo *= 0.5;
      if (constraint_value(stationary_point(mu_lo)) >= budget) {
        lower = true;
        break;
      }
    }
    if (!upper) {
      // budget at or below the constrained minimum: the feasible set is
      // essentially the minimizer itself.
      Vector u = stationary_point(1e14);
      out.maximizer = u - g0_;
      out.value = v_.dot(out.maximizer);
      return out;
    }
    if (!lower) {
      // constraint slack never binds within bracket range; treat as interior.
      Vector u = stationary_point(mu_lo);
      out.maximizer = u - g0_;
      out.value = v_.dot(out.maximizer);
      out.converged = false;
      return out;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = std::sqrt(mu_lo * mu_hi);
      if (mid == mu_lo || mid == mu_hi) break;
      (constraint_value(stationary_point(mid)) >= budget ? mu_lo : mu_hi) = mid;
    }
    Vector u = stationary_point(std::sqrt(mu_lo * mu_hi));
    out.maximizer = u - g0_;
    out.value = v_.dot(out.maximizer);
    return out;
  }

 private:
  double weighted_norm(const Vector& u) const {
    double t = 0.0;
    for (int j = 0; j < u.size(); ++j) t += r_.c[j] * u[j] * u[j];
    return std::sqrt(t);
  }

  double constraint_value(const Vector& u) const {
    double t = 0.0;
    for (int j = 0; j < u.size(); ++j) {
      const double dj = u[j] - g0_[j];
      t += r_.d[j] * dj * dj;
    }
    return t + r_.lambda2 * std::pow(weighted_norm(u), r_.q);
  }

  Vector u_at(double mu, double rho) const {
    const int k = static_cast<int>(v_.size());
    const double kap = r_.lambda2 * r_.q * std::pow(rho, r_.q - 2.0);
    Vector u(k);
    for (int j = 0; j < k; ++j)
      u[j] = (v_[j] + 2.0 * mu * r_.d[j] * g0_[j]) / (2.0 * mu * r_.d[j] + mu * kap * r_.c[j]);
    return u;
  }

  Vector stationary_point(double mu) const {
    // psi(rho) = I(u(rho)) - rho is positive for small rho (I scales like
    // rho^{2-q}) and negative for large rho; its unique root is the
    // self-consistent seminorm value.
    double hi = 1.0;
    for (int it = 0; it < 600 && hi < 1e290; ++it) {
      if (weighted_norm(u_at(mu, hi)) <= hi) break;
      hi *= 2.0;
    }
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (weighted_norm(u_at(mu, mid)) > mid ? lo : hi) = mid;
    }
    const double rho = 0.5 * (lo + hi);
    return u_at(mu, rho > 0.0 ? rho : 1e-300);
  }

  const Vector& v_;
  const PowerConstraint& r_;
  const Vector& g0_;
};

enum class Route { Finite, SingleQuad, TwoQuad, Power, Ascent };

// One (family, penalty, dataset) inner-maximization context, reused across a
// grid of s values.
class InnerEngine {
 public:
  InnerEngine(const FunctionFamily& family, const Penalty& penalty, const Dataset* data,
              const PopulationOracle* oracle, std::optional<double> varsigma_c)
      : family_(family), penalty_(penalty), data_(data), oracle_(oracle), vc_(varsigma_c) {
    if (vc_ && !(*vc_ > 0.0)) throw ArgumentError("varsigma constant must be positive");
    if (!family_.has_g0()) throw ArgumentError("inner maximization needs a registered g0");
    g0_ = family_.g0();
    fin_ = dynamic_cast<const FiniteFamily*>(&family_);
    if (fin_) {
      build_finite();
      return;
    }
    build_structured();
  }

  InnerResult evaluate(double s) const {
    if (!(s >= 0.0)) throw ArgumentError("inner maximization: s must be nonnegative");
    if (tau_min_sq_ && s * s < *tau_min_sq_ * (1.0 - 1e-11) - 1e-12)
      throw ArgumentError("inner maximization: s below tau_min");
    const double budget = s * s;
    switch (route_) {
      case Route::Finite:
        return evaluate_finite(budget);
      case Route::SingleQuad: {
        InnerResult r = linear_over_quad(v_, quad_, budget);
        r.maximizer = g0_ + r.maximizer;
        return r;
      }
      case Route::TwoQuad: {
        InnerResult r = linear_over_two_quads(v_, two_a1_, budget, two_a2_, two_c2_);
        r.maximizer = g0_ + r.maximizer;
        return r;
      }
      case Route::Power: {
        PowerInner inner(v_, power_, g0_);
        InnerResult r = inner.solve(budget);
        r.maximizer = g0_ + r.maximizer;
        return r;
      }
      case Route::Ascent:
        return evaluate_ascent(s);
    }
    throw std::logic_error("unreachable");
  }

  std::optional<double> tau_min_sq() const { return tau_min_sq_; }

 private:
  void build_finite() {
    const int m = fin_->size();
    const int i0 = fin_->member_index(g0_);
    const double pop0 = fin_->member_population_mean(i0);
    const double emp0 = data_ ? fin_->member_empirical_mean(i0, *data_) : 0.0;
    tau2s_.resize(m);
    gains_.resize(m);
    double best = kInf;
    for (int i = 0; i < m; ++i) {
      const double pop = fin_->member_population_mean(i);
      const double pen = penalty_.value(fin_->member(i));
      tau2s_[i] = vc_ ? (*vc_) * (*vc_) * fin_->member_variance(i, i0) + pen : (pop - pop0) + pen;
      gains_[i] = data_ ? (emp0 - pop0) - (fin_->member_empirical_mean(i, *data_) - pop) : 0.0;
      best = std::min(best, tau2s_[i]);
    }
    route_ = Route::Finite;
    tau_min_sq_ = best;
  }

  void build_structured() {
    bool structured = family_.linear_process();
    Vector base;
    if (structured) {
      if (vc_) {
        auto cov = family_.process_covariance();
        if (cov && nearly_diagonal(*cov)) {
          base = cov->diagonal() * (*vc_) * (*vc_);
        } else {
          structured = false;
        }
      } else {
        auto metric = family_.pure_metric();
        if (metric) {
          base = *metric;
        } else {
          structured = false;
        }
      }
    }
    if (structured && !(base.array() > 0.0).all()) structured = false;

    // Extra centered quadratic constraints contributed by a bounded domain or
    // an indicator penalty. Only sets centered at g0 keep the dual scalar.
    bool representable = structured;
    int extras = 0;
    Vector extra_a;
    double extra_c = 0.0;
    auto add_extra = [&](const ConvexSet& set) {
      const bool centered = set.dim() == g0_.size() && (set.center() - g0_).norm() <= 1e-12;
      if (centered && set.kind() == ConvexSet::Kind::Ball) {
        extra_a = Vector::Ones(set.dim());
        extra_c = set.radius() * set.radius();
        ++extras;
      } else if (centered && set.kind() == ConvexSet::Kind::WeightedBall) {
        extra_a = set.weights();
        extra_c = set.radius() * set.radius();
        ++extras;
      } else {
        representable = false;
      }
    };
    if (family_.domain().set.kind() != ConvexSet::Kind::All) add_extra(family_.domain().set);

    Vector pen_quad = Vector::Zero(family_.dim());
    bool power = false;
    switch (penalty_.kind()) {
      case Penalty::Kind::Zero:
        break;
      case Penalty::Kind::Indicator:
        add_extra(penalty_.indicator_set());
        break;
      case Penalty::Kind::Squared:
        pen_quad = penalty_.lambda() * penalty_.lambda() *
                   penalty_.seminorm().quad_coeffs(family_.dim());
        break;
      case Penalty::Kind::Power: {
        Vector coeffs = penalty_.seminorm().quad_coeffs(family_.dim());
        if (coeffs.maxCoeff() > 0.0 && penalty_.lambda() != 0.0) power = true;
        break;
      }
    }
    const bool pen_offsets = pen_quad.maxCoeff() > 0.0 && g0_.cwiseAbs().maxCoeff() > 0.0;

    if (structured && representable && extras <= 1 && !(power && extras > 0) &&
        !(pen_offsets && extras > 0)) {
      if (!data_) throw ArgumentError("inner maximization needs data");
      v_ = -family_.empirical_process_coeffs(*data_);
      if (power) {
        power_.d = base;
        power_.c = penalty_.seminorm().quad_coeffs(family_.dim());
        power_.lambda2 = penalty_.lambda() * penalty_.lambda();
        power_.q = penalty_.exponent();
        route_ = Route::Power;
        PowerInner inner(v_, power_, g0_);
        tau_min_sq_ = std::max(0.0, inner.constraint_minimum());
        return;
      }
      if (extras == 1) {
        two_a1_ = base + pen_quad;
        two_a2_ = extra_a;
        two_c2_ = extra_c;
        route_ = Route::TwoQuad;
        tau_min_sq_ = penalty_.kind() == Penalty::Kind::Squared ? penalty_.value(g0_) : 0.0;
        return;
      }
      quad_.a = base + pen_quad;
      quad_.b = pen_quad.cwiseProduct(g0_);
      quad_.c0 = penalty_.kind() == Penalty::Kind::Squared ? penalty_.value(g0_) : 0.0;
      route_ = Route::SingleQuad;
      tau_min_sq_ = std::max(0.0, quad_.minimum());
      return;
    }

    route_ = Route::Ascent;
    if (family_.linear_process() && data_) v_ = -family_.empirical_process_coeffs(*data_);
    if (!vc_) {
      TauMinResult tm = tau_min(family_, penalty_);
      tau_min_sq_ = tm.tau_min_sq;
      ascent_center_ = tm.minimizer;
    } else {
      ascent_center_ = g0_;
    }
  }

  InnerResult evaluate_finite(double budget) const {
    const double tol = 1e-12 * std::max(1.0, std::abs(budget));
    InnerResult out;
    out.converged = true;
    double best = -kInf;
    int best_i = -1;
    for (std::size_t i = 0; i < tau2s_.size(); ++i) {
      if (tau2s_[i] <= budget + tol && gains_[i] > best) {
        best = gains_[i];
        best_i = static_cast<int>(i);
      }
    }
    if (best_i < 0) throw ArgumentError("inner maximization: no feasible member at this s");
    out.value = best;
    out.maximizer = fin_->member(best_i);
    return out;
  }

  double constraint_sq(const Vector& g) const {
    if (!vc_) return excess_risk(family_, g, penalty_, oracle_);
    double var = 0.0;
    if (family_.linear_process()) {
      auto cov = family_.process_covariance();
      if (cov) {
        Vector d = g - g0_;
        var = d.dot((*cov) * d);
      } else if (oracle_) {
        var = process_variance_via_oracle(g);
      } else {
        throw UnsupportedScenario("varsigma constraint needs a covariance or an oracle");
      }
    } else if (oracle_) {
      var = process_variance_via_oracle(g);
    } else {
      throw UnsupportedScenario("varsigma constraint needs a covariance or an oracle");
    }
    return (*vc_) * (*vc_) * var + penalty_.value(g);
  }

  double process_variance_via_oracle(const Vector& g) const {
    return oracle_->variance([&](const Observation& o) {
      return family_.evaluate(g, o) - family_.evaluate(g0_, o);
    });
  }

  double ascent_objective(const Vector& g) const {
    if (family_.linear_process() && v_.size() == g.size()) return v_.dot(g - g0_);
    if (!data_) throw ArgumentError("inner maximization needs data");
    const double emp = empirical_mean(family_, g, *data_);
    const double emp0 = empirical_mean(family_, g0_, *data_);
    return (emp0 - population_of(g0_)) - (emp - population_of(g));
  }

  double population_of(const Vector& g) const {
    if (auto closed = family_.population_mean(g)) return *closed;
    if (oracle_) return oracle_->mean([&](const Observation& o) { return family_.evaluate(g, o); });
    throw UnsupportedScenario("inner maximization needs a population mean or an oracle");
  }

  InnerResult evaluate_ascent(double s) const {
    const double budget = s * s;
    const double feas_tol = 1e-10 * std::max(1.0, budget);
    auto feasible = [&](const Vector& g) {
      if (!family_.in_domain(g, 1e-9)) return false;
      return constraint_sq(g) <= budget + feas_tol;
    };
    Vector base = ascent_center_;
    if (!feasible(base)) {
      base = family_.domain().set.project(base);
      if (!feasible(base))
        throw UnsupportedScenario("ascent route: no feasible starting point found");
    }

    const int dim = family_.dim();
    std::mt19937_64 rng(0x51ab5eedULL ^ std::bit_cast<std::uint64_t>(s));
    std::normal_distribution<double> gauss;
    const double span = std::max({1.0, 4.0 * s, base.cwiseAbs().maxCoeff()});

    auto toward_boundary = [&](Vector dir) {
      const double norm = dir.norm();
      if (norm == 0.0) return base;
      dir /= norm;
      double lo = 0.0, hi = span;
      for (int it = 0; it < 40 && feasible(base + hi * dir); ++it) {
        lo = hi;
        hi *= 2.0;
      }
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(base + mid * dir) ? lo : hi) = mid;
      }
      return Vector(base + lo * dir);
    };
    auto pull_feasible = [&](const Vector& g) {
      Vector cand = family_.domain().set.project(g);
      if (feasible(cand)) return cand;
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(base + mid * (cand - base)) ? lo : hi) = mid;
      }
      return Vector(base + lo * (cand - base));
    };
    auto gradient = [&](const Vector& g) {
      if (family_.linear_process() && v_.size() == g.size()) return v_;
      Vector grad(dim);
      const double h = 1e-5 * (1.0 + g.norm());
      Vector p = g;
      for (int j = 0; j < dim; ++j) {
        const double saved = p[j];
        p[j] = saved + h;
        const double up = ascent_objective(p);
        p[j] = saved - h;
        const double down = ascent_objective(p);
        p[j] = saved;
        grad[j] = (up - down) / (2.0 * h);
      }
      return grad;
    };

    InnerResult out;
    out.maximizer = base;
    out.value = ascent_objective(base);
    out.converged = false;
    const Vector& reg_g0 = family_.g0();
    for (int start = 0; start < 8; ++start) {
      Vector g;
      if (start == 0) {
        g = base;
      } else if (start == 1 && feasible(reg_g0)) {
        g = reg_g0;
      } else {
        Vector dir(dim);
        for (int j = 0; j < dim; ++j) dir[j] = gauss(rng);
        g = toward_boundary(dir);
      }
      double step = std::max(s, 1e-3);
      double value = ascent_objective(g);
      bool settled = false;
      for (int iter = 0; iter < 400; ++iter) {
        Vector grad = gradient(g);
        const double gn = grad.norm();
        if (gn < 1e-14) {
          settled = true;
          break;
        }
        Vector cand = pull_feasible(g + (step / gn) * grad);
        const double cand_value = ascent_objective(cand);
        if (cand_value > value + 1e-14 * (1.0 + std::abs(value))) {
          g = cand;
          value = cand_value;
        } else {
          step *= 0.5;
          if (step < 1e-12 * std::max(1.0, s)) {
            settled = true;
            break;
          }
        }
      }
      if (value > out.value) {
        out.value = value;
        out.maximizer = g;
      }
      out.converged = out.converged || settled;
    }
    return out;
  }

  const FunctionFamily& family_;
  const Penalty& penalty_;
  const Dataset* data_;
  const PopulationOracle* oracle_;
  std::optional<double> vc_;
  Vector g0_;
  const FiniteFamily* fin_ = nullptr;

  Route route_ = Route::Ascent;
  std::vector<double> tau2s_, gains_;
  Vector v_;
  QuadConstraint quad_;
  Vector two_a1_, two_a2_;
  double two_c2_ = 0.0;
  PowerConstraint power_;
  Vector ascent_center_;
  std::optional<double> tau_min_sq_;
};

void validate_grid(const SGrid& grid, const std::optional<double>& tau_min_sq) {
  if (grid.points.empty()) throw ArgumentError("grid: no points");
  for (std::size_t i = 1; i < grid.points.size(); ++i)
    if (!(grid.points[i] > grid.points[i - 1]))
      throw ArgumentError("grid: points must be strictly increasing");
  if (tau_min_sq && grid.points.front() < std::sqrt(std::max(0.0, *tau_min_sq)) - 1e-12)
    throw ArgumentError("grid: start below tau_min");
}

RiskCurve curve_over_grid(const InnerEngine& engine, const SGrid& grid, RiskCurve::Kind kind,
                          bool clamp_monotone) {
  RiskCurve curve;
  curve.grid = grid;
  curve.kind = kind;
  curve.replicates = 1;
  curve.values.reserve(grid.size());
  curve.ses.assign(grid.size(), 0.0);
  curve.flags.reserve(grid.size());
  double running = -kInf;
  for (double s : grid.points) {
    InnerResult r = engine.evaluate(s);
    running = clamp_monotone ? std::max(running, r.value) : r.value;
    curve.values.push_back(clamp_monotone ? running : r.value);
    curve.flags.push_back(r.converged ? 0 : 1);
  }
  return curve;
}

}  // namespace

SGrid SGrid::geometric(double start, double end, double ratio) {
  if (!(start > 0.0)) throw ArgumentError("geometric grid: start must be positive");
  if (!(ratio > 1.0)) throw ArgumentError("geometric grid: ratio must exceed 1");
  if (!(end >= start)) throw ArgumentError("grid: end must be >= start");
  SGrid g;
  g.rule = Rule::Geometric;
  g.start = start;
  g.end = end;
  g.parameter = ratio;
  double s = start;
  while (s < end * (1.0 - 1e-12)) {
    g.points.push_back(s);
    s *= ratio;
  }
  g.points.push_back(end);
  return g;
}

SGrid SGrid::uniform(double start, double end, double step) {
  if (!(step > 0.0)) throw ArgumentError("uniform grid: step must be positive");
  if (!(end >= start)) throw ArgumentError("grid: end must be >= start");
  SGrid g;
  g.rule = Rule::Uniform;
  g.start = start;
  g.end = end;
  g.parameter = step;
  double s = start;
  while (s < end - 1e-12 * std::max(1.0, std::abs(end))) {
    g.points.push_back(s);
    s += step;
  }
  g.points.push_back(end);
  return g;
}

SGrid SGrid::explicit_points(std::vector<double> points) {
  if (points.empty()) throw ArgumentError("grid: no points");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (!(points[i] > points[i - 1]))
      throw ArgumentError("grid: points must be strictly increasing");
  SGrid g;
  g.rule = Rule::Explicit;
  g.start = points.front();
  g.end = points.back();
  g.points = std::move(points);
  return g;
}

double SGrid::max_step() const {
  double m = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) m = std::max(m, points[i] - points[i - 1]);
  return m;
}

bool RiskCurve::any_flagged() const {
  for (auto f : flags)
    if (f) return true;
  return false;
}

InnerResult hat_E_detail(const FunctionFamily& family, const Penalty& penalty, const Dataset& data,
                         const PopulationOracle* oracle, double s) {
  InnerEngine engine(family, penalty, &data, oracle, std::nullopt);
  return engine.evaluate(s);
}

double hat_E(const FunctionFamily& family, const Penalty& penalty, const Dataset& data,
             const PopulationOracle* oracle, double s) {
  return hat_E_detail(family, penalty, data, oracle, s).value;
}

RiskCurve empirical_curve(const FunctionFamily& family, const Penalty& penalty,
                          const Dataset& data, const PopulationOracle* oracle, const SGrid& grid) {
  InnerEngine engine(family, penalty, &data, oracle, std::nullopt);
  validate_grid(grid, engine.tau_min_sq());
  return curve_over_grid(engine, grid, RiskCurve::Kind::EmpiricalSingle, true);
}

RiskCurve mean_E_curve(const FunctionFamily& family, const Penalty& penalty,
                       const MeanCurveSpec& spec, const PopulationOracle* oracle,
                       const SGrid& grid) {
  if (spec.replicates < 2) throw ArgumentError("mean curve: needs at least 2 replicates");
  if (!spec.sampler) throw ArgumentError("mean curve: needs a dataset sampler");
  const std::size_t R = spec.replicates;
  const std::size_t G = grid.size();
  std::vector<double> table(R * G, 0.0);
  std::vector<std::uint8_t> rep_flags(R, 0);
  parallel_for(R, spec.workers, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(spec.seed, 0, i));
    Dataset ds = spec.sampler(rng);
    InnerEngine engine(family, penalty, &ds, oracle, std::nullopt);
    if (i == 0) validate_grid(grid, engine.tau_min_sq());
    double running = -kInf;
    for (std::size_t j = 0; j < G; ++j) {
      InnerResult r = engine.evaluate(grid.points[j]);
      running = std::max(running, r.value);
      table[i * G + j] = running;
      if (!r.converged) rep_flags[i] = 1;
    }
  });

  RiskCurve curve;
  curve.grid = grid;
  curve.kind = RiskCurve::Kind::PopulationMean;
  curve.replicates = R;
  curve.seed = spec.seed;
  curve.values.resize(G);
  curve.ses.resize(G);
  curve.flags.assign(G, 0);
  bool any_flag = false;
  for (auto f : rep_flags) any_flag = any_flag || f != 0;
  for (std::size_t j = 0; j < G; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < R; ++i) mean += table[i * G + j];
    mean /= static_cast<double>(R);
    double var = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      const double d = table[i * G + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(R - 1);
    curve.values[j] = mean;
    curve.ses[j] = std::sqrt(var / static_cast<double>(R));
    curve.flags[j] = any_flag ? 1 : 0;
  }
  return curve;
}

ArgminReport argmin_curve(const RiskCurve& curve) {
  if (curve.values.empty()) throw ArgumentError("argmin: empty curve");
  const std::size_t G = curve.values.size();
  double best = kInf;
  for (std::size_t j = 0; j < G; ++j) {
    if (!std::isfinite(curve.values[j])) throw ArgumentError("argmin: non-finite curve value");
    const double s = curve.grid.points[j];
    best = std::min(best, s * s - curve.values[j]);
  }
  ArgminReport report;
  report.value = best;
  bool first = true;
  for (std::size_t j = 0; j < G; ++j) {
    const double s = curve.grid.points[j];
    const double obj = s * s - curve.values[j];
    if (obj <= best + 1e-9) {
      report.ties.push_back(s);
      if (first) {
        report.s = s;
        first = false;
      }
    }
  }
  return report;
}

MinimumLemmaReport verify_minimum_lemma(const FunctionFamily& family, const Penalty& penalty,
                                        const Dataset& data, const PopulationOracle* oracle,
                                        const std::optional<SGrid>& grid) {
  MinimumLemmaReport report;
  const SolveResult fit = solve_erm(family, penalty, data);
  if (!fit.converged) throw ConditionViolation("minimum lemma: empirical solve did not converge");
  report.tau_hat = std::sqrt(std::max(0.0, excess_risk(family, fit.minimizer, penalty, oracle)));

  if (const auto* fin = dynamic_cast<const FiniteFamily*>(&family)) {
    // The empirical curve is a step function with jumps at member tau values,
    // so s^2 - hat_E(s) attains its minimum at one of them; enumerate exactly.
    const int m = fin->size();
    const int i0 = fin->member_index(family.g0());
    const double pop0 = fin->member_population_mean(i0);
    const double emp0 = fin->member_empirical_mean(i0, data);
    std::vector<double> tau2(m), gain(m);
    for (int i = 0; i < m; ++i) {
      const double pop = fin->member_population_mean(i);
      tau2[i] = (pop - pop0) + penalty.value(fin->member(i));
      gain[i] = (emp0 - pop0) - (fin->member_empirical_mean(i, data) - pop);
    }
    double best_obj = kInf;
    double best_s = 0.0;
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return tau2[a] < tau2[b]; });
    double running_gain = -kInf;
    for (int idx : order) {
      running_gain = std::max(running_gain, gain[idx]);
      const double obj = tau2[idx] - running_gain;
      if (best_obj == kInf || obj < best_obj - 1e-15 * std::max(1.0, std::abs(best_obj))) {
        best_obj = obj;
        best_s = std::sqrt(std::max(0.0, tau2[idx]));
      }
    }
    report.s_hat = best_s;
    report.exact = true;
    report.gap = std::abs(report.tau_hat - report.s_hat);
    return report;
  }

  if (!grid) throw ArgumentError("minimum lemma: non-finite families need a grid");
  RiskCurve curve = empirical_curve(family, penalty, data, oracle, *grid);
  report.s_hat = argmin_curve(curve).s;
  report.exact = false;
  report.gap = std::abs(report.tau_hat - report.s_hat);
  return report;
}

RiskCurve varsigma_curve(const FunctionFamily& family, const Penalty& penalty, const Dataset& data,
                         const PopulationOracle* oracle, double c_const, const SGrid& grid) {
  InnerEngine engine(family, penalty, &data, oracle, c_const);
  validate_grid(grid, engine.tau_min_sq());
  return curve_over_grid(engine, grid, RiskCurve::Kind::Varsigma, true);
}

ConcavityReport concavity_check(const RiskCurve& curve, double tol) {
  const std::size_t G = curve.values.size();
  if (G < 3) throw ArgumentError("concavity check: needs at least 3 points");
  ConcavityReport report;
  const auto& s = curve.grid.points;
  const auto& v = curve.values;
  for (std::size_t i = 0; i + 2 < G; ++i) {
    for (std::size_t k = i + 2; k < G; ++k) {
      const double mid = 0.5 * (s[i] + s[k]);
      // Binary search for a grid point representing the midpoint.
      auto it = std::lower_bound(s.begin() + i, s.begin() + k + 1, mid - 1e-9);
      if (it == s.begin() + k + 1) continue;
      const std::size_t j = static_cast<std::size_t>(it - s.begin());
      if (std::abs(s[j] - mid) > 1e-9 * std::max(1.0, std::abs(mid))) continue;
      const double violation = 0.5 * (v[i] + v[k]) - v[j];
      if (violation > report.worst_violation) {
        report.worst_violation = violation;
        if (violation > tol) {
          report.pass = false;
          report.counterexample = {s[i], s[j], s[k]};
        }
      }
    }
  }
  return report;
}

RiskCurve shifted_curve(const FunctionFamily& family, const Penalty& penalty, const Dataset& data,
                        const PopulationOracle* oracle, double tau_star_sq,
                        const SGrid& grid_tilde) {
  if (tau_star_sq < 0.0) throw ArgumentError("shifted curve: tau*^2 must be nonnegative");
  InnerEngine engine(family, penalty, &data, oracle, std::nullopt);
  if (auto tm = engine.tau_min_sq(); tm && tau_star_sq < *tm - 1e-12)
    throw ArgumentError("shifted curve: tau*^2 below tau_min^2");
  validate_grid(grid_tilde, std::nullopt);
  if (auto tm = engine.tau_min_sq(); tm) {
    // Admissible window: the shifted coordinate of an original point s >= tau*.
    const double floor_sq = tau_star_sq - *tm;
    for (double st : grid_tilde.points)
      if (st * st < floor_sq - 1e-12)
        throw ArgumentError("shifted curve: grid point below the admissible range");
  }
  RiskCurve curve;
  curve.grid = grid_tilde;
  curve.kind = RiskCurve::Kind::Shifted;
  curve.replicates = 1;
  curve.ses.assign(grid_tilde.size(), 0.0);
  for (double st : grid_tilde.points) {
    InnerResult r = engine.evaluate(std::sqrt(tau_star_sq + st * st));
    curve.values.push_back(r.value);
    curve.flags.push_back(r.converged ? 0 : 1);
  }
  return curve;
}

KappaGammaReport kappa_gamma(const FunctionFamily& family, const Penalty& penalty,
                             const PopulationOracle* oracle, double tau_star_sq,
                             const SGrid& s_grid) {
  if (tau_star_sq < 0.0) throw ArgumentError("kappa: tau*^2 must be nonnegative");
  validate_grid(s_grid, std::nullopt);
  if (!(s_grid.points.front() > 0.0)) throw ArgumentError("kappa: grid must be positive");
  if (!family.has_g0()) throw ArgumentError("kappa: needs a registered g0");

  KappaGammaReport report;
  report.kappa.reserve(s_grid.size());

  if (const auto* fin = dynamic_cast<const FiniteFamily*>(&family)) {
    const int m = fin->size();
    const int i0 = fin->member_index(family.g0());
    const double pop0 = fin->member_population_mean(i0);
    std::vector<double> tau2(m), excess(m);
    for (int i = 0; i < m; ++i) {
      excess[i] = fin->member_population_mean(i) - pop0;
      tau2[i] = excess[i] + penalty.value(fin->member(i));
    }
    for (double s : s_grid.points) {
      const double budget = tau_star_sq + s * s;
      double best = -kInf;
      for (int i = 0; i < m; ++i)
        if (tau2[i] <= budget + 1e-12 * std::max(1.0, budget)) best = std::max(best, excess[i]);
      if (best == -kInf) throw ArgumentError("kappa: no feasible member at this s");
      report.kappa.push_back(std::sqrt(std::max(0.0, best)));
    }
  } else {
    const auto metric = family.pure_metric();
    const bool pen_free = penalty.kind() == Penalty::Kind::Zero;
    if (!metric || !pen_free || !(metric->array() > 0.0).all())
      throw UnsupportedScenario(
          "kappa: only finite families and penalty-free pure scenarios are supported");
    const auto& set = family.domain().set;
    std::optional<double> cap;  // max of the metric form over the domain
    if (set.kind() == ConvexSet::Kind::Ball &&
        (set.center() - family.g0()).norm() <= 1e-12) {
      cap = set.radius() * set.radius() * metric->maxCoeff();
    } else if (set.kind() == ConvexSet::Kind::WeightedBall &&
               (set.center() - family.g0()).norm() <= 1e-12) {
      double ratio = 0.0;
      for (int j = 0; j < metric->size(); ++j)
        ratio = std::max(ratio, (*metric)[j] / set.weights()[j]);
      cap = set.radius() * set.radius() * ratio;
    } else if (set.kind() != ConvexSet::Kind::All) {
      throw UnsupportedScenario("kappa: unsupported domain shape");
    }
    for (double s : s_grid.points) {
      double value = tau_star_sq + s * s;
      if (cap) value = std::min(value, *cap);
      report.kappa.push_back(std::sqrt(value));
    }
  }

  report.gamma_hat = 0.0;
  for (std::size_t j = 0; j < s_grid.size(); ++j)
    report.gamma_hat = std::max(report.gamma_hat, report.kappa[j] / s_grid.points[j]);
  return report;
}

ShiftedOrderingReport shifted_ordering_check(double s, double s0, double tau_star_sq) {
  if (tau_star_sq < 0.0) throw ArgumentError("ordering check: tau*^2 must be nonnegative");
  if (s * s < tau_star_sq || s0 * s0 < tau_star_sq)
    throw ArgumentError("ordering check: s^2 and s0^2 must be at least tau*^2");
  ShiftedOrderingReport report;
  report.s_tilde = std::sqrt(s * s - tau_star_sq);
  report.s_star = std::sqrt(s0 * s0 - tau_star_sq);
  report.holds = std::abs(report.s_tilde - report.s_star) >= std::abs(s - s0) - 1e-12;
  return report;
}

}  // namespace erm
