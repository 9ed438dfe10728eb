#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>

#include "erm/common.hpp"
#include "erm/dataset.hpp"

namespace erm {

// Evaluates population functionals P phi. Three modes: exact sums on a finite
// support, adaptive Gauss-Legendre quadrature against a density on an
// interval, and a plug-in empirical measure with a declared draw count and
// seed.
class PopulationOracle {
 public:
  enum class Mode { Discrete, Quadrature, MonteCarlo };

  virtual ~PopulationOracle() = default;
  virtual Mode mode() const = 0;
  virtual double mean(const std::function<double(const Observation&)>& phi) const = 0;

  double variance(const std::function<double(const Observation&)>& phi) const {
    double m = mean(phi);
    double m2 = mean([&](const Observation& o) {
      double v = phi(o);
      return v * v;
    });
    return std::max(0.0, m2 - m * m);
  }
};

class DiscreteOracle final : public PopulationOracle {
 public:
  DiscreteOracle(std::vector<double> support, Vector probs);
  Mode mode() const override { return Mode::Discrete; }
  double mean(const std::function<double(const Observation&)>& phi) const override;

 private:
  std::vector<Observation> points_;
  Vector probs_;
};

class QuadratureOracle final : public PopulationOracle {
 public:
  // Starts at base_nodes and doubles until successive values agree to rel_tol
  // or max_nodes is reached.
  QuadratureOracle(double a, double b, std::function<double(double)> density,
                   int base_nodes = 64, double rel_tol = 1e-10, int max_nodes = 1024);
  Mode mode() const override { return Mode::Quadrature; }
  double mean(const std::function<double(const Observation&)>& phi) const override;
  int last_node_count() const { return last_nodes_; }

 private:
  double a_, b_;
  std::function<double(double)> density_;
  int base_nodes_;
  double rel_tol_;
  int max_nodes_;
  mutable int last_nodes_ = 0;
};

class MonteCarloOracle final : public PopulationOracle {
 public:
  // Draws `count` observations once at construction with the given seed.
  MonteCarloOracle(std::function<Observation(std::mt19937_64&)> sampler, std::size_t count,
                   std::uint64_t seed);
  Mode mode() const override { return Mode::MonteCarlo; }
  double mean(const std::function<double(const Observation&)>& phi) const override;
  std::size_t draw_count() const { return draws_.size(); }

 private:
  std::vector<Observation> draws_;
};

}  // namespace erm
