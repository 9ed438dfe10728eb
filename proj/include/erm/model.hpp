#pragma once

#include "erm/family.hpp"
#include "erm/oracle.hpp"
#include "erm/penalty.hpp"
#include "erm/solver.hpp"

namespace erm {

// P_n f_g; throws DomainViolation when g is outside the declared domain.
double empirical_mean(const FunctionFamily& family, const Vector& g, const Dataset& data);

// Penalized excess risk tau^2(f_g) = P(f_g - f_g0) + pen(f_g). Uses, in
// order: the family's pure metric, its closed-form population mean, then the
// oracle.
double excess_risk(const FunctionFamily& family, const Vector& g, const Penalty& penalty,
                   const PopulationOracle* oracle = nullptr);

struct TauMinResult {
  double tau_min_sq = 0.0;
  Vector minimizer;
  bool converged = true;
};

// min over the domain of tau^2. Exhaustive for finite families; a composite
// solve on the population objective otherwise.
TauMinResult tau_min(const FunctionFamily& family, const Penalty& penalty,
                     const SolverSettings& settings = {});

}  // namespace erm
