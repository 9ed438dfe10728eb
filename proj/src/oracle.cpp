#include "erm/oracle.hpp"

#include <cmath>

#include "erm/quadrature.hpp"

namespace erm {

DiscreteOracle::DiscreteOracle(std::vector<double> support, Vector probs) : probs_(std::move(probs)) {
  if (static_cast<Eigen::Index>(support.size()) != probs_.size()) {
    throw ArgumentError("discrete oracle: size mismatch");
  }
  if (probs_.minCoeff() < 0 || std::abs(probs_.sum() - 1.0) > 1e-12) {
    throw ArgumentError("discrete oracle: probabilities must sum to one");
  }
  points_.reserve(support.size());
  for (double s : support) {
    Observation o;
    o.x = Vector::Constant(1, s);
    points_.push_back(std::move(o));
  }
}

double DiscreteOracle::mean(const std::function<double(const Observation&)>& phi) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < points_.size(); ++k) acc += probs_[k] * phi(points_[k]);
  return acc;
}

QuadratureOracle::QuadratureOracle(double a, double b, std::function<double(double)> density,
                                   int base_nodes, double rel_tol, int max_nodes)
    : a_(a), b_(b), density_(std::move(density)), base_nodes_(base_nodes), rel_tol_(rel_tol),
      max_nodes_(max_nodes) {
  if (!(b_ > a_)) throw ArgumentError("quadrature oracle: empty interval");
  if (base_nodes_ < 1 || max_nodes_ < base_nodes_) throw ArgumentError("quadrature oracle: bad node counts");
}

double QuadratureOracle::mean(const std::function<double(const Observation&)>& phi) const {
  Observation o;
  o.x = Vector::Constant(1, 0.0);
  auto evaluate = [&](int m) {
    auto [x, w] = gauss_legendre(m, a_, b_);
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      o.x[0] = x[i];
      acc += w[i] * density_(x[i]) * phi(o);
    }
    return acc;
  };
  int m = base_nodes_;
  double prev = evaluate(m);
  while (2 * m <= max_nodes_) {
    m *= 2;
    double next = evaluate(m);
    double diff = std::abs(next - prev);
    prev = next;
    if (diff <= rel_tol_ * std::max(1.0, std::abs(next))) break;
  }
  last_nodes_ = m;
  return prev;
}

MonteCarloOracle::MonteCarloOracle(std::function<Observation(std::mt19937_64&)> sampler,
                                   std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ArgumentError("monte carlo oracle: zero draws");
  std::mt19937_64 rng(mix64(seed));
  draws_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) draws_.push_back(sampler(rng));
}

double MonteCarloOracle::mean(const std::function<double(const Observation&)>& phi) const {
  double acc = 0.0;
  for (const auto& o : draws_) acc += phi(o);
  return acc / static_cast<double>(draws_.size());
}

}  // namespace erm
