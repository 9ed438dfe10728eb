#include "erm/expfam.hpp"

#include <algorithm>
#include <cmath>

#include "erm/quadrature.hpp"

namespace erm {

namespace {

constexpr double kStabilityTol = 1e-10;

double fit_log_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) continue;
    const double lx = std::log(xs[i]);
    const double ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return 0.0;
  const double denom = m * sxx - sx * sx;
  return denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
}

}  // namespace

BaseMeasure BaseMeasure::discrete(std::vector<double> points, std::vector<double> weights) {
  if (points.empty() || points.size() != weights.size())
    throw ArgumentError("base measure: points and weights must match and be nonempty");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ArgumentError("base measure: weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ArgumentError("base measure: total mass must be positive");
  BaseMeasure m;
  m.kind_ = Kind::Discrete;
  m.points_ = std::move(points);
  m.weights_ = std::move(weights);
  return m;
}

BaseMeasure BaseMeasure::interval(double a, double b, std::function<double(double)> density) {
  if (!(b > a)) throw ArgumentError("base measure: interval must have positive length");
  if (!density) throw ArgumentError("base measure: density required");
  BaseMeasure m;
  m.kind_ = Kind::Interval;
  m.a_ = a;
  m.b_ = b;
  m.density_ = std::move(density);
  return m;
}

double BaseMeasure::total_mass() const {
  return integrate([](double) { return 1.0; });
}

double BaseMeasure::integrate(const std::function<double(double)>& fn) const {
  if (kind_ == Kind::Discrete) {
    double acc = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) acc += weights_[i] * fn(points_[i]);
    return acc;
  }
  double previous = 0.0;
  bool have_previous = false;
  for (int nodes = 64; nodes <= 1024; nodes *= 2) {
    const auto [xs, ws] = gauss_legendre(nodes, a_, b_);
    double acc = 0.0;
    for (int k = 0; k < nodes; ++k) acc += ws[k] * density_(xs[k]) * fn(xs[k]);
    last_nodes_ = nodes;
    if (have_previous && std::abs(acc - previous) <= kStabilityTol * std::max(1.0, std::abs(acc)))
      return acc;
    previous = acc;
    have_previous = true;
  }
  return previous;
}

double BaseMeasure::log_integral_exp(const std::function<double(double)>& fn) const {
  if (kind_ == Kind::Discrete) {
    std::vector<double> terms;
    terms.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (weights_[i] == 0.0) continue;
      terms.push_back(std::log(weights_[i]) + fn(points_[i]));
    }
    return log_sum_exp(terms);
  }
  double previous = 0.0;
  bool have_previous = false;
  for (int nodes = 64; nodes <= 1024; nodes *= 2) {
    const auto [xs, ws] = gauss_legendre(nodes, a_, b_);
    std::vector<double> terms;
    terms.reserve(nodes);
    for (int k = 0; k < nodes; ++k) {
      const double mass = ws[k] * density_(xs[k]);
      if (mass <= 0.0) continue;
      terms.push_back(std::log(mass) + fn(xs[k]));
    }
    const double value = log_sum_exp(terms);
    last_nodes_ = nodes;
    if (have_previous && std::abs(value - previous) <= kStabilityTol * std::max(1.0, std::abs(value)))
      return value;
    previous = value;
    have_previous = true;
  }
  return previous;
}

std::vector<std::pair<double, double>> BaseMeasure::atoms(int min_nodes) const {
  std::vector<std::pair<double, double>> out;
  if (kind_ == Kind::Discrete) {
    for (std::size_t i = 0; i < points_.size(); ++i) out.emplace_back(points_[i], weights_[i]);
    return out;
  }
  const int nodes = std::max(min_nodes, last_nodes_);
  const auto [xs, ws] = gauss_legendre(nodes, a_, b_);
  for (int k = 0; k < nodes; ++k) out.emplace_back(xs[k], ws[k] * density_(xs[k]));
  return out;
}

double BaseMeasure::sup_abs(const std::function<double(double)>& fn) const {
  double best = 0.0;
  if (kind_ == Kind::Discrete) {
    for (double x : points_) best = std::max(best, std::abs(fn(x)));
    return best;
  }
  const int samples = 2049;
  for (int i = 0; i < samples; ++i) {
    const double x = a_ + (b_ - a_) * static_cast<double>(i) / (samples - 1);
    best = std::max(best, std::abs(fn(x)));
  }
  return best;
}

ExpFamily::ExpFamily(BaseMeasure base, std::vector<std::function<double(double)>> stats,
                     ConvexSet domain, bool center, std::optional<BaseMeasure> centering_measure)
    : base_(std::move(base)), stats_(std::move(stats)), domain_(std::move(domain)) {
  if (stats_.empty()) throw ArgumentError("exp family: needs at least one statistic");
  if (domain_.dim() != static_cast<int>(stats_.size()))
    throw ArgumentError("exp family: domain dimension must match the statistic count");
  offsets_.assign(stats_.size(), 0.0);
  if (center) {
    const BaseMeasure& cm = centering_measure ? *centering_measure : base_;
    const double mass = cm.total_mass();
    for (std::size_t j = 0; j < stats_.size(); ++j)
      offsets_[j] = cm.integrate(stats_[j]) / mass;
  }
}

double ExpFamily::evaluate(const Vector& theta, double x) const {
  if (theta.size() != dim()) throw ArgumentError("exp family: parameter dimension mismatch");
  double v = 0.0;
  for (int j = 0; j < dim(); ++j) v += theta[j] * statistic(j, x);
  return v;
}

double ExpFamily::log_partition(const Vector& theta) const {
  const double value = base_.log_integral_exp([&](double x) { return evaluate(theta, x); });
  if (!std::isfinite(value)) throw DomainViolation("log partition: integral diverges");
  return value;
}

Vector ExpFamily::log_partition_gradient(const Vector& theta) const {
  // Tilted mean of the statistics, max-shifted for stability.
  const int k = dim();
  const auto atoms = base_.atoms();
  double shift = -std::numeric_limits<double>::infinity();
  for (const auto& [x, mass] : atoms)
    if (mass > 0.0) shift = std::max(shift, evaluate(theta, x));
  Vector numer = Vector::Zero(k);
  double denom = 0.0;
  for (const auto& [x, mass] : atoms) {
    if (mass <= 0.0) continue;
    const double w = mass * std::exp(evaluate(theta, x) - shift);
    denom += w;
    for (int j = 0; j < k; ++j) numer[j] += w * statistic(j, x);
  }
  if (!(denom > 0.0)) throw DomainViolation("log partition gradient: degenerate tilt");
  return numer / denom;
}

double ExpFamily::base_mean_square(const Vector& theta) const {
  const double mass = base_.total_mass();
  return base_.integrate([&](double x) {
    const double v = evaluate(theta, x);
    return v * v;
  }) / mass;
}

double ExpFamily::sup_norm(const Vector& theta) const {
  return base_.sup_abs([&](double x) { return evaluate(theta, x); });
}

double log_partition(const ExpFamily& family, const Vector& theta) {
  return family.log_partition(theta);
}

TaylorReport taylor_ratio(const ExpFamily& family, const Vector& theta,
                          const std::vector<double>& t_grid) {
  if (t_grid.empty()) throw ArgumentError("taylor ratio: empty t grid");
  const double psq = family.base_mean_square(theta);
  if (!(psq > 0.0)) throw ArgumentError("taylor ratio: P g^2 must be positive");
  TaylorReport report;
  for (double t : t_grid) {
    if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("taylor ratio: t must lie in (0,1]");
    TaylorRow row;
    row.t = t;
    row.ratio = family.log_partition(t * theta) / (t * t * psq);
    row.deviation_rate = std::abs(row.ratio - 0.5) / t;
    report.rows.push_back(row);
  }

  // Group by decade of t; compare the worst deviation rates of the two
  // smallest decades.
  auto decade_of = [](double t) { return static_cast<int>(std::floor(std::log10(t) + 1e-12)); };
  int d_small = decade_of(report.rows.front().t);
  for (const auto& row : report.rows) d_small = std::min(d_small, decade_of(row.t));
  double k_small = 0.0, k_next = 0.0;
  bool has_next = false;
  for (const auto& row : report.rows) {
    const int d = decade_of(row.t);
    if (d == d_small) k_small = std::max(k_small, row.deviation_rate);
    if (d == d_small + 1) {
      k_next = std::max(k_next, row.deviation_rate);
      has_next = true;
    }
  }
  report.kappa_small = k_small;
  report.kappa_next = k_next;
  if (has_next) {
    const double lo = std::min(k_small, k_next);
    const double hi = std::max(k_small, k_next);
    report.kappa_stable = hi <= 2.0 * std::max(lo, 1e-12);
  }
  return report;
}

ExpansionReport small_norm_expansion(const ExpFamily& family, const Vector& theta,
                                     const std::vector<double>& eta_grid) {
  const double sup = family.sup_norm(theta);
  if (!(sup > 0.0)) throw ArgumentError("small norm expansion: g must be nonzero");
  ExpansionReport report;
  std::vector<double> errs;
  std::vector<double> etas;
  for (double eta : eta_grid) {
    if (!(eta > 0.0)) throw ArgumentError("small norm expansion: eta must be positive");
    const Vector scaled = (eta / sup) * theta;
    const double psq = family.base_mean_square(scaled);
    if (!(psq > 0.0)) throw ArgumentError("small norm expansion: P g^2 must be positive");
    ExpansionRow row;
    row.eta = eta;
    row.ratio = family.log_partition(scaled) / (psq / 2.0);
    report.rows.push_back(row);
    etas.push_back(eta);
    errs.push_back(std::abs(row.ratio - 1.0));
  }
  report.fitted_slope = fit_log_log_slope(etas, errs);
  return report;
}

SolveResult fit_density_mle(const ExpFamily& family, const Dataset& data, const Penalty& penalty,
                            const SolverSettings& settings) {
  if (data.size() == 0) throw ArgumentError("density mle: empty dataset");
  const int k = family.dim();
  Vector sample_mean = Vector::Zero(k);
  for (const auto& obs : data.observations()) {
    for (int j = 0; j < k; ++j) sample_mean[j] += family.statistic(j, obs.x[0]);
  }
  sample_mean /= static_cast<double>(data.size());

  const ConvexSet& domain = family.domain();
  const bool constrained = domain.kind() != ConvexSet::Kind::All;
  const bool fold_penalty = constrained && penalty.differentiable();
  if (constrained && penalty.kind() == Penalty::Kind::Indicator)
    throw UnsupportedScenario("density mle: indicator penalty with a constrained domain");

  CompositeProblem problem;
  problem.smooth_value = [&, fold_penalty](const Vector& theta) {
    double v = -sample_mean.dot(theta) + family.log_partition(theta);
    if (fold_penalty) v += penalty.value(theta);
    return v;
  };
  problem.smooth_gradient = [&, fold_penalty](const Vector& theta) {
    Vector g = family.log_partition_gradient(theta) - sample_mean;
    if (fold_penalty) g += penalty.gradient(theta);
    return g;
  };
  if (constrained) {
    problem.prox = [&](const Vector& v, double) { return domain.project(v); };
    problem.nonsmooth_value = [](const Vector&) { return 0.0; };
  } else {
    problem.prox = [&](const Vector& v, double eta) { return penalty.prox(v, eta); };
    problem.nonsmooth_value = [&](const Vector& v) { return penalty.value(v); };
  }

  Vector start = Vector::Zero(k);
  if (constrained) start = domain.project(start);
  return prox_gradient(problem, start, settings);
}

ScalarLink ScalarLink::gaussian() {
  ScalarLink link;
  link.value = [](double xi) { return 0.5 * xi * xi; };
  link.derivative = [](double xi) { return xi; };
  link.curvature_bound = 1.0;
  return link;
}

ScalarLink ScalarLink::exponential(double lo, double hi) {
  if (!(hi > lo)) throw ArgumentError("exponential link: empty domain");
  ScalarLink link;
  link.value = [](double xi) { return std::exp(xi); };
  link.derivative = [](double xi) { return std::exp(xi); };
  link.xi_lo = lo;
  link.xi_hi = hi;
  link.curvature_bound = std::exp(hi);
  return link;
}

RegressionResult fit_expfam_regression(const Vector& y, const ScalarLink& link,
                                       const ConvexSet& domain, const Penalty& penalty,
                                       const SolverSettings& settings) {
  const int n = static_cast<int>(y.size());
  if (n == 0) throw ArgumentError("regression: empty response");
  if (domain.dim() != n) throw ArgumentError("regression: domain dimension must equal n");
  if (!link.value || !link.derivative) throw ArgumentError("regression: link incomplete");

  const bool constrained = domain.kind() != ConvexSet::Kind::All;
  const bool fold_penalty = constrained && penalty.differentiable();
  if (constrained && penalty.kind() == Penalty::Kind::Indicator)
    throw UnsupportedScenario("regression: indicator penalty with a constrained domain");

  auto clipped_flag = std::make_shared<bool>(false);
  auto clip = [link, clipped_flag](double xi) {
    if (xi < link.xi_lo) {
      *clipped_flag = true;
      return link.xi_lo;
    }
    if (xi > link.xi_hi) {
      *clipped_flag = true;
      return link.xi_hi;
    }
    return xi;
  };

  const double inv_n = 1.0 / static_cast<double>(n);
  CompositeProblem problem;
  problem.smooth_value = [&, clip, fold_penalty](const Vector& g) {
    double v = -y.dot(g) * inv_n;
    for (int i = 0; i < n; ++i) v += link.value(clip(g[i])) * inv_n;
    if (fold_penalty) v += penalty.value(g);
    return v;
  };
  problem.smooth_gradient = [&, clip, fold_penalty](const Vector& g) {
    Vector grad(n);
    for (int i = 0; i < n; ++i) grad[i] = (link.derivative(clip(g[i])) - y[i]) * inv_n;
    if (fold_penalty) grad += penalty.gradient(g);
    return grad;
  };
  if (constrained) {
    problem.prox = [&](const Vector& v, double) { return domain.project(v); };
    problem.nonsmooth_value = [](const Vector&) { return 0.0; };
  } else {
    problem.prox = [&](const Vector& v, double eta) { return penalty.prox(v, eta); };
    problem.nonsmooth_value = [&](const Vector& v) { return penalty.value(v); };
  }

  SolverSettings tuned = settings;
  // A fixed step needs the whole smooth part to have a Lipschitz gradient;
  // a folded power penalty does not (its gradient blows up at 0).
  const bool fixed_step_ok = !fold_penalty || penalty.kind() == Penalty::Kind::Squared;
  if (!tuned.lipschitz && link.curvature_bound > 0.0 && fixed_step_ok) {
    double l = link.curvature_bound * inv_n;
    if (fold_penalty) {
      if (auto pl = penalty.gradient_lipschitz(n)) l += *pl;
    }
    if (l > 0.0) tuned.lipschitz = l;
  }

  Vector start = Vector::Zero(n);
  for (int i = 0; i < n; ++i) start[i] = clip(start[i]);
  if (constrained) start = domain.project(start);
  *clipped_flag = false;

  RegressionResult out;
  out.solve = prox_gradient(problem, start, tuned);
  out.clipped = *clipped_flag;
  return out;
}

}  // namespace erm
