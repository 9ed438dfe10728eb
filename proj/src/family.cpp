#include "erm/family.hpp"

#include <cmath>

#include "erm/quadrature.hpp"

namespace erm {

void FunctionFamily::register_g0(Vector g0) {
  if (g0.size() != dim()) throw ArgumentError("register_g0: dimension mismatch");
  if (!in_domain(g0, 1e-9)) throw DomainViolation("register_g0: g0 outside parameter domain");
  g0_ = std::move(g0);
  has_g0_ = true;
}

const Vector& FunctionFamily::g0() const {
  if (!has_g0_) throw ArgumentError("family: g0 not registered");
  return g0_;
}

bool FunctionFamily::in_domain(const Vector& g, double tol) const {
  const ParameterDomain& dom = domain();
  if (dom.finite()) {
    for (const auto& el : dom.elements) {
      if ((el - g).lpNorm<Eigen::Infinity>() <= tol) return true;
    }
    return false;
  }
  return dom.set.contains(g, tol);
}

Vector FunctionFamily::parameter_gradient(const Vector& g, const Observation& obs) const {
  const double h = 1e-6 * std::max(1.0, g.norm());
  Vector grad(g.size());
  Vector gp = g, gm = g;
  for (int j = 0; j < g.size(); ++j) {
    gp[j] = g[j] + h;
    gm[j] = g[j] - h;
    grad[j] = (evaluate(gp, obs) - evaluate(gm, obs)) / (2.0 * h);
    gp[j] = g[j];
    gm[j] = g[j];
  }
  return grad;
}

Vector FunctionFamily::empirical_process_coeffs(const Dataset&) const {
  throw UnsupportedScenario("empirical_process_coeffs: family is not a linear process");
}

FiniteFamily::FiniteFamily(std::vector<Vector> params, std::vector<double> support, Matrix values,
                           Vector probs)
    : params_(std::move(params)),
      support_(std::move(support)),
      values_(std::move(values)),
      probs_(std::move(probs)),
      domain_(ParameterDomain::finite_list(params_)) {
  if (params_.empty()) throw ArgumentError("finite family: no members");
  if (values_.rows() != static_cast<Eigen::Index>(params_.size()) ||
      values_.cols() != static_cast<Eigen::Index>(support_.size())) {
    throw ArgumentError("finite family: value table shape mismatch");
  }
  if (probs_.size() != static_cast<Eigen::Index>(support_.size())) {
    throw ArgumentError("finite family: probability size mismatch");
  }
  if (probs_.minCoeff() < 0 || std::abs(probs_.sum() - 1.0) > 1e-12) {
    throw ArgumentError("finite family: probabilities must sum to one");
  }
}

int FiniteFamily::member_index(const Vector& g, double tol) const {
  for (int i = 0; i < size(); ++i) {
    if ((params_[i] - g).lpNorm<Eigen::Infinity>() <= tol) return i;
  }
  throw DomainViolation("finite family: parameter is not a member");
}

int FiniteFamily::support_index(double x) const {
  for (std::size_t k = 0; k < support_.size(); ++k) {
    if (support_[k] == x) return static_cast<int>(k);
  }
  throw DomainViolation("finite family: sample outside support");
}

double FiniteFamily::evaluate(const Vector& g, const Observation& obs) const {
  return values_(member_index(g), support_index(obs.x[0]));
}

std::optional<double> FiniteFamily::population_mean(const Vector& g) const {
  return member_population_mean(member_index(g));
}

double FiniteFamily::member_population_mean(int i) const { return values_.row(i) * probs_; }

double FiniteFamily::member_empirical_mean(int i, const Dataset& data) const {
  double acc = 0.0;
  for (const auto& o : data.observations()) acc += values_(i, support_index(o.x[0]));
  return acc / static_cast<double>(data.size());
}

double FiniteFamily::member_variance(int i, int j) const {
  Eigen::RowVectorXd diff = values_.row(i) - values_.row(j);
  double m = diff * probs_;
  double m2 = diff.cwiseProduct(diff) * probs_;
  return std::max(0.0, m2 - m * m);
}

std::optional<double> FiniteFamily::sup_bound() const {
  if (!has_g0_) return std::nullopt;
  int i0 = member_index(g0_);
  double K = 0.0;
  for (int i = 0; i < size(); ++i) {
    K = std::max(K, (values_.row(i) - values_.row(i0)).cwiseAbs().maxCoeff());
  }
  return K;
}

GaussianMeanFamily::GaussianMeanFamily(Vector center, ConvexSet domain)
    : center_(std::move(center)), domain_(ParameterDomain::convex(std::move(domain))) {
  if (domain_.set.dim() != center_.size()) throw ArgumentError("gaussian mean: dim mismatch");
}

double GaussianMeanFamily::evaluate(const Vector& g, const Observation& obs) const {
  Vector d = g - center_;
  return -d.dot(obs.x) + d.squaredNorm();
}

Vector GaussianMeanFamily::parameter_gradient(const Vector& g, const Observation& obs) const {
  return 2.0 * (g - center_) - obs.x;
}

Vector GaussianMeanFamily::empirical_process_coeffs(const Dataset& data) const {
  Vector mean = Vector::Zero(dim());
  for (const auto& o : data.observations()) mean += o.x;
  mean /= static_cast<double>(data.size());
  return -mean;
}

std::optional<double> GaussianMeanFamily::population_mean(const Vector& g) const {
  return (g - center_).squaredNorm();
}

std::optional<Vector> GaussianMeanFamily::population_mean_gradient(const Vector& g) const {
  return 2.0 * (g - center_);
}

BasisDensityFamily::BasisDensityFamily(int dim, Vector theta, ConvexSet domain)
    : dim_(dim), theta_(std::move(theta)), domain_(ParameterDomain::convex(std::move(domain))) {
  if (theta_.size() != dim_) throw ArgumentError("basis density: theta dimension mismatch");
  if (domain_.set.dim() != dim_) throw ArgumentError("basis density: domain dimension mismatch");
  double lower = 1.0 - std::sqrt(2.0) * theta_.lpNorm<1>();
  if (lower <= 0) throw ArgumentError("basis density: g0 is not bounded away from zero");
}

double BasisDensityFamily::basis_at(int j, double x) const {
  return std::sqrt(2.0) * std::cos(M_PI * j * x);
}

double BasisDensityFamily::density_at(double x) const {
  double v = 1.0;
  for (int j = 0; j < dim_; ++j) v += theta_[j] * basis_at(j + 1, x);
  return v;
}

double BasisDensityFamily::density_sup() const { return 1.0 + std::sqrt(2.0) * theta_.lpNorm<1>(); }

double BasisDensityFamily::evaluate(const Vector& g, const Observation& obs) const {
  double gx = 1.0;
  for (int j = 0; j < dim_; ++j) gx += g[j] * basis_at(j + 1, obs.x[0]);
  return -gx + 0.5 * (1.0 + g.squaredNorm());
}

Vector BasisDensityFamily::parameter_gradient(const Vector& g, const Observation& obs) const {
  Vector grad(dim_);
  for (int j = 0; j < dim_; ++j) grad[j] = -basis_at(j + 1, obs.x[0]) + g[j];
  return grad;
}

Vector BasisDensityFamily::empirical_process_coeffs(const Dataset& data) const {
  // (P_n - P)(f0 - f_g) = sum_j (g_j - theta_j) (P_n - P) phi_j = w . (theta - g)
  Vector emp = Vector::Zero(dim_);
  for (const auto& o : data.observations()) {
    for (int j = 0; j < dim_; ++j) emp[j] += basis_at(j + 1, o.x[0]);
  }
  emp /= static_cast<double>(data.size());
  return theta_ - emp;
}

std::optional<double> BasisDensityFamily::population_mean(const Vector& g) const {
  return -(1.0 + g.dot(theta_)) + 0.5 * (1.0 + g.squaredNorm());
}

std::optional<Vector> BasisDensityFamily::population_mean_gradient(const Vector& g) const {
  return Vector(g - theta_);
}

std::optional<Matrix> BasisDensityFamily::process_covariance() const {
  if (cov_cache_) return cov_cache_;
  // Cov_P(phi_j, phi_k) with P having density g0; 512 nodes are far below
  // rounding error for these smooth integrands.
  auto [nodes, weights] = gauss_legendre(512, 0.0, 1.0);
  Matrix phi(dim_, nodes.size());
  Vector dens(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    dens[k] = density_at(nodes[k]) * weights[k];
    for (int j = 0; j < dim_; ++j) phi(j, k) = basis_at(j + 1, nodes[k]);
  }
  Vector means = phi * dens;
  Matrix second = phi * dens.asDiagonal() * phi.transpose();
  cov_cache_ = second - means * means.transpose();
  return cov_cache_;
}

std::optional<double> BasisDensityFamily::sup_bound() const {
  if (!has_g0_) return std::nullopt;
  auto radius = domain_.set.bounding_radius(g0_);
  if (!radius) return std::nullopt;
  // |f_g - f_g0| <= sup|g - g0| + |(||g||^2 - ||g0||^2)| / 2 over the domain.
  double r = *radius;
  double linf = std::sqrt(2.0 * dim_) * r;
  double quad = 0.5 * (2.0 * r * g0_.norm() + r * r);
  return linf + quad;
}

}  // namespace erm
