#pragma once

#include <memory>
#include <optional>

#include "erm/common.hpp"
#include "erm/convex_set.hpp"
#include "erm/dataset.hpp"

namespace erm {

// Parameter domain: a convex primitive, or an explicit finite list of
// parameter vectors (handled exhaustively everywhere).
struct ParameterDomain {
  ConvexSet set = ConvexSet::all(0);
  std::vector<Vector> elements;

  bool finite() const { return !elements.empty(); }

  static ParameterDomain convex(ConvexSet s) { return ParameterDomain{std::move(s), {}}; }
  static ParameterDomain finite_list(std::vector<Vector> els) {
    if (els.empty()) throw ArgumentError("parameter domain: empty finite list");
    return ParameterDomain{ConvexSet::all(static_cast<int>(els.front().size())), std::move(els)};
  }
};

// A parametrized loss class {f_g : g in domain}. Families declare the
// structure the algorithms exploit:
//  - linear_process: g -> f_g - P f_g is linear (affine offsets cancel in
//    differences), so (P_n - P)(f0 - f_g) = w . (g0 - g) with data-only w;
//  - pure_metric D: P(f_g - f_g0) = (g - g0)' D (g - g0) with D diagonal;
//  - process_covariance V: sigma^2(f_g - f_g0) = (g - g0)' V (g - g0).
class FunctionFamily {
 public:
  virtual ~FunctionFamily() = default;

  virtual int dim() const = 0;
  virtual const ParameterDomain& domain() const = 0;
  virtual double evaluate(const Vector& g, const Observation& obs) const = 0;

  // d f_g(x) / d g; default is central differences.
  virtual Vector parameter_gradient(const Vector& g, const Observation& obs) const;

  virtual bool linear_process() const { return false; }
  virtual Vector empirical_process_coeffs(const Dataset& data) const;

  virtual std::optional<Vector> pure_metric() const { return std::nullopt; }
  virtual std::optional<Matrix> process_covariance() const { return std::nullopt; }

  // P f_g in closed form when the family knows it.
  virtual std::optional<double> population_mean(const Vector& g) const { return std::nullopt; }
  virtual std::optional<Vector> population_mean_gradient(const Vector& g) const { return std::nullopt; }

  // sup over the domain and sample space of |f_g - f_g0|, when finite.
  virtual std::optional<double> sup_bound() const { return std::nullopt; }

  void register_g0(Vector g0);
  bool has_g0() const { return has_g0_; }
  const Vector& g0() const;

  bool in_domain(const Vector& g, double tol = 1e-9) const;

 protected:
  Vector g0_;
  bool has_g0_ = false;
};

// Explicit list of functions on a finite scalar sample space with known
// sampling probabilities; every operation on it is an exact enumeration.
class FiniteFamily final : public FunctionFamily {
 public:
  // params: one parameter vector per member; values(i,k) = f_i(support[k]).
  FiniteFamily(std::vector<Vector> params, std::vector<double> support, Matrix values,
               Vector probs);

  int dim() const override { return static_cast<int>(params_.front().size()); }
  const ParameterDomain& domain() const override { return domain_; }
  double evaluate(const Vector& g, const Observation& obs) const override;
  std::optional<double> population_mean(const Vector& g) const override;
  std::optional<double> sup_bound() const override;

  int size() const { return static_cast<int>(params_.size()); }
  const Vector& member(int i) const { return params_[i]; }
  int member_index(const Vector& g, double tol = 1e-12) const;
  int support_index(double x) const;
  const std::vector<double>& support() const { return support_; }
  const Vector& probabilities() const { return probs_; }
  double member_population_mean(int i) const;
  double member_empirical_mean(int i, const Dataset& data) const;
  // sigma^2(f_i - f_j) under the stored probabilities.
  double member_variance(int i, int j) const;

 private:
  std::vector<Vector> params_;
  std::vector<double> support_;
  Matrix values_;
  Vector probs_;
  ParameterDomain domain_;
};

// Mean estimation under a standard Gaussian covariate: f_g(x) =
// -(g - center)'x + ||g - center||^2, the canonical linear pure family.
class GaussianMeanFamily final : public FunctionFamily {
 public:
  GaussianMeanFamily(Vector center, ConvexSet domain);

  int dim() const override { return static_cast<int>(center_.size()); }
  const ParameterDomain& domain() const override { return domain_; }
  double evaluate(const Vector& g, const Observation& obs) const override;
  Vector parameter_gradient(const Vector& g, const Observation& obs) const override;
  bool linear_process() const override { return true; }
  Vector empirical_process_coeffs(const Dataset& data) const override;
  // Valid only at g0 = center: P(f_g - f_g0) = ||g - center||^2 - ||g0 - center||^2.
  std::optional<Vector> pure_metric() const override {
    if (!has_g0_ || (g0_ - center_).lpNorm<Eigen::Infinity>() != 0.0) return std::nullopt;
    return Vector::Ones(dim());
  }
  std::optional<Matrix> process_covariance() const override {
    return Matrix::Identity(dim(), dim());
  }
  std::optional<double> population_mean(const Vector& g) const override;
  std::optional<Vector> population_mean_gradient(const Vector& g) const override;

 private:
  Vector center_;
  ParameterDomain domain_;
};

// Density estimation by projection onto the span of a cosine basis on [0,1]:
// g_c = 1 + sum_j c_j phi_j with phi_j(x) = sqrt(2) cos(pi j x), and
// f_c = -g_c + ||g_c||^2 / 2. The sampling density is g0. Excess risk is
// ||c - c0||^2 / 2, so the pure metric is I/2.
class BasisDensityFamily final : public FunctionFamily {
 public:
  // theta: coefficients of the sampling density g0 (free part); domain is a
  // convex set over the free coefficients.
  BasisDensityFamily(int dim, Vector theta, ConvexSet domain);

  int dim() const override { return dim_; }
  const ParameterDomain& domain() const override { return domain_; }
  double evaluate(const Vector& g, const Observation& obs) const override;
  Vector parameter_gradient(const Vector& g, const Observation& obs) const override;
  bool linear_process() const override { return true; }
  Vector empirical_process_coeffs(const Dataset& data) const override;
  // Valid only at g0 = theta (the sampling coefficients).
  std::optional<Vector> pure_metric() const override {
    if (!has_g0_ || (g0_ - theta_).lpNorm<Eigen::Infinity>() != 0.0) return std::nullopt;
    return Vector::Constant(dim_, 0.5);
  }
  std::optional<Matrix> process_covariance() const override;
  std::optional<double> population_mean(const Vector& g) const override;
  std::optional<Vector> population_mean_gradient(const Vector& g) const override;
  std::optional<double> sup_bound() const override;

  double basis_at(int j, double x) const;     // phi_j, j >= 1
  double density_at(double x) const;          // g0(x)
  double density_sup() const;                 // upper bound for rejection sampling
  const Vector& theta() const { return theta_; }

 private:
  int dim_;
  Vector theta_;
  ParameterDomain domain_;
  mutable std::optional<Matrix> cov_cache_;
};

}  // namespace erm
