#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>

#include "erm/common.hpp"
#include "erm/dataset.hpp"
#include "erm/family.hpp"
#include "erm/model.hpp"
#include "erm/oracle.hpp"
#include "erm/penalty.hpp"

namespace erm {

struct SGrid {
  enum class Rule { Geometric, Uniform, Explicit };
  Rule rule = Rule::Explicit;
  double start = 0.0;
  double end = 0.0;
  double parameter = 0.0;  // ratio for geometric, step for uniform
  std::vector<double> points;

  static SGrid geometric(double start, double end, double ratio = 1.05);
  static SGrid uniform(double start, double end, double step);
  static SGrid explicit_points(std::vector<double> points);

  std::size_t size() const { return points.size(); }
  // Largest gap between adjacent points; 0 for a single point.
  double max_step() const;
};

struct RiskCurve {
  enum class Kind { EmpiricalSingle, PopulationMean, Varsigma, Shifted };
  SGrid grid;
  std::vector<double> values;
  std::vector<double> ses;          // zero for single-sample curves
  std::vector<std::uint8_t> flags;  // nonzero: inner maximizer did not certify convergence
  Kind kind = Kind::EmpiricalSingle;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;

  bool any_flagged() const;
};

struct InnerResult {
  double value = 0.0;
  Vector maximizer;  // parameter g attaining the value
  bool converged = true;
};

// sup of (P_n - P)(f_g0 - f_g) over {tau(f_g) <= s}. Routes, in order:
// exhaustive enumeration (finite family), closed form / Lagrangian dual
// (linear process with diagonal quadratic constraints), nested bisection
// (linear process with a power penalty), multi-start projected ascent
// (anything else, flagged when uncertified).
InnerResult hat_E_detail(const FunctionFamily& family, const Penalty& penalty,
                         const Dataset& data, const PopulationOracle* oracle, double s);
double hat_E(const FunctionFamily& family, const Penalty& penalty, const Dataset& data,
             const PopulationOracle* oracle, double s);

// One dataset, whole grid. Values are clamped to be nondecreasing: the exact
// curve is monotone by feasible-set nesting, so any decrease is solver noise.
RiskCurve empirical_curve(const FunctionFamily& family, const Penalty& penalty,
                          const Dataset& data, const PopulationOracle* oracle, const SGrid& grid);

struct MeanCurveSpec {
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  int workers = 1;
  // Draws one dataset per replicate; replicate i uses seed (seed, i) so the
  // same datasets serve every grid point (common random numbers).
  std::function<Dataset(std::mt19937_64&)> sampler;
};

RiskCurve mean_E_curve(const FunctionFamily& family, const Penalty& penalty,
                       const MeanCurveSpec& spec, const PopulationOracle* oracle,
                       const SGrid& grid);

struct ArgminReport {
  double s = 0.0;      // smallest grid point attaining the minimum
  double value = 0.0;  // min of s^2 - curve(s)
  std::vector<double> ties;  // all grid points within 1e-9 of the minimum
};

ArgminReport argmin_curve(const RiskCurve& curve);

struct MinimumLemmaReport {
  double tau_hat = 0.0;  // tau(f_hat) from the penalized empirical minimizer
  double s_hat = 0.0;    // argmin of s^2 - hat_E(s)
  double gap = 0.0;
  bool exact = false;  // both sides enumerated (finite family), no grid error
};

// Finite families compare tau(f_hat) with the exact step-curve argmin (the
// candidates are the member tau values); other families use the grid.
MinimumLemmaReport verify_minimum_lemma(const FunctionFamily& family, const Penalty& penalty,
                                        const Dataset& data, const PopulationOracle* oracle,
                                        const std::optional<SGrid>& grid = std::nullopt);

// Same maximization with the constraint c^2 sigma^2(f - f_g0) + pen <= s^2.
RiskCurve varsigma_curve(const FunctionFamily& family, const Penalty& penalty,
                         const Dataset& data, const PopulationOracle* oracle, double c_const,
                         const SGrid& grid);

struct ConcavityReport {
  bool pass = true;
  double worst_violation = 0.0;
  // (s1, mid, s2) of the worst violating triple when pass is false.
  std::optional<std::array<double, 3>> counterexample;
};

// Midpoint concavity over all grid-representable triples.
ConcavityReport concavity_check(const RiskCurve& curve, double tol = 1e-8);

// F(s_tilde) = hat_E(sqrt(tau_star_sq + s_tilde^2)) on the shifted grid.
RiskCurve shifted_curve(const FunctionFamily& family, const Penalty& penalty, const Dataset& data,
                        const PopulationOracle* oracle, double tau_star_sq,
                        const SGrid& grid_tilde);

struct KappaGammaReport {
  std::vector<double> kappa;  // sqrt of max P(f - f_g0) under tau^2 <= tau_star_sq + s^2
  double gamma_hat = 0.0;     // max over the grid of kappa_s / s
};

KappaGammaReport kappa_gamma(const FunctionFamily& family, const Penalty& penalty,
                             const PopulationOracle* oracle, double tau_star_sq,
                             const SGrid& s_grid);

struct ShiftedOrderingReport {
  double s_tilde = 0.0;
  double s_star = 0.0;
  bool holds = false;  // |s_tilde - s_star| >= |s - s0| within 1e-12
};

ShiftedOrderingReport shifted_ordering_check(double s, double s0, double tau_star_sq);

}  // namespace erm
