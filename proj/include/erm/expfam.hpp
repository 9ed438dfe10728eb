#pragma once

#include <functional>
#include <limits>
#include <optional>

#include "erm/common.hpp"
#include "erm/convex_set.hpp"
#include "erm/dataset.hpp"
#include "erm/penalty.hpp"
#include "erm/solver.hpp"

namespace erm {

// Sigma-finite base measure: an explicit weighted support, or a density on an
// interval integrated by Gauss-Legendre nodes that double until the value is
// stable to 1e-10 (64 up to 1024 nodes).
class BaseMeasure {
 public:
  enum class Kind { Discrete, Interval };

  static BaseMeasure discrete(std::vector<double> points, std::vector<double> weights);
  static BaseMeasure interval(double a, double b, std::function<double(double)> density);

  Kind kind() const { return kind_; }
  double total_mass() const;
  double integrate(const std::function<double(double)>& fn) const;
  // log of integral of exp(fn) against the measure, via log-sum-exp.
  double log_integral_exp(const std::function<double(double)>& fn) const;
  // sup of |fn| over the support (dense sampling for intervals).
  double sup_abs(const std::function<double(double)>& fn) const;
  // Discretization as (point, mass) atoms: the support itself, or a
  // Gauss-Legendre rule with at least min_nodes nodes.
  std::vector<std::pair<double, double>> atoms(int min_nodes = 256) const;

  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  double lower() const { return a_; }
  double upper() const { return b_; }
  int last_node_count() const { return last_nodes_; }

 private:
  BaseMeasure() = default;
  Kind kind_ = Kind::Discrete;
  std::vector<double> points_, weights_;
  double a_ = 0.0, b_ = 0.0;
  std::function<double(double)> density_;
  mutable int last_nodes_ = 0;
};

// Exponential family with linear sufficient statistics: g_theta(x) =
// sum_j theta_j psi_j(x), statistics centered so that the base integral of
// each psi_j vanishes. The reference parameter is theta = 0.
class ExpFamily {
 public:
  // centering_measure overrides the base for the centering step when supplied.
  ExpFamily(BaseMeasure base, std::vector<std::function<double(double)>> stats, ConvexSet domain,
            bool center = true, std::optional<BaseMeasure> centering_measure = std::nullopt);

  int dim() const { return static_cast<int>(offsets_.size()); }
  const BaseMeasure& base() const { return base_; }
  const ConvexSet& domain() const { return domain_; }

  double statistic(int j, double x) const { return stats_[j](x) - offsets_[j]; }
  double evaluate(const Vector& theta, double x) const;

  double log_partition(const Vector& theta) const;       // d(g_theta)
  Vector log_partition_gradient(const Vector& theta) const;  // mean of psi under p_theta
  // P g_theta^2 under the normalized base measure.
  double base_mean_square(const Vector& theta) const;
  // sup over the support of |g_theta|.
  double sup_norm(const Vector& theta) const;

 private:
  BaseMeasure base_;
  std::vector<std::function<double(double)>> stats_;
  std::vector<double> offsets_;
  ConvexSet domain_;
};

// d(g_theta); throws DomainViolation when the integral diverges.
double log_partition(const ExpFamily& family, const Vector& theta);

struct TaylorRow {
  double t = 0.0;
  double ratio = 0.0;           // d(t g) / (t^2 P g^2)
  double deviation_rate = 0.0;  // |ratio - 1/2| / t
};

struct TaylorReport {
  std::vector<TaylorRow> rows;
  double kappa_small = 0.0;  // max deviation rate over the smallest decade of t
  double kappa_next = 0.0;   // same over the next decade
  bool kappa_stable = false; // the two rates agree within a factor of 2
};

TaylorReport taylor_ratio(const ExpFamily& family, const Vector& theta,
                          const std::vector<double>& t_grid);

struct ExpansionRow {
  double eta = 0.0;
  double ratio = 0.0;  // d(g_eta) / (P g_eta^2 / 2) with g scaled to sup norm eta
};

struct ExpansionReport {
  std::vector<ExpansionRow> rows;
  double fitted_slope = 0.0;  // log-log slope of |ratio - 1| against eta
};

ExpansionReport small_norm_expansion(const ExpFamily& family, const Vector& theta,
                                     const std::vector<double>& eta_grid);

// argmin over the domain of -P_n g_theta + d(g_theta) + pen(theta).
SolveResult fit_density_mle(const ExpFamily& family, const Dataset& data, const Penalty& penalty,
                            const SolverSettings& settings = {});

// Scalar cumulant d(xi), convex on [xi_lo, xi_hi].
struct ScalarLink {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  double xi_lo = -std::numeric_limits<double>::infinity();
  double xi_hi = std::numeric_limits<double>::infinity();
  double curvature_bound = 0.0;  // sup of d'' when known; enables a fixed step

  static ScalarLink gaussian();                       // d(xi) = xi^2 / 2
  static ScalarLink exponential(double lo, double hi);  // d(xi) = e^xi on [lo, hi]
};

struct RegressionResult {
  SolveResult solve;
  bool clipped = false;  // some iterate left the cumulant domain and was projected back
};

// argmin over g in G of -Y.g/n + sum_i d(g_i)/n + pen(g).
RegressionResult fit_expfam_regression(const Vector& y, const ScalarLink& link,
                                       const ConvexSet& domain, const Penalty& penalty,
                                       const SolverSettings& settings = {});

}  // namespace erm
