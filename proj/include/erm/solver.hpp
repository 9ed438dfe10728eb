#pragma once

#include <optional>

#include "erm/common.hpp"
#include "erm/dataset.hpp"
#include "erm/family.hpp"
#include "erm/penalty.hpp"

namespace erm {

struct SolverSettings {
  int max_iterations = 2000;
  double tolerance = 1e-9;          // on the prox fixed-point gap
  double backtracking = 0.5;        // step shrink factor
  double initial_step = 1.0;
  std::optional<double> lipschitz;  // fixed step 1/L when known
};

struct SolveResult {
  Vector minimizer;
  double objective = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Composite problem min smooth(g) + nonsmooth(g) where nonsmooth enters via
// its prox map.
struct CompositeProblem {
  std::function<double(const Vector&)> smooth_value;
  std::function<Vector(const Vector&)> smooth_gradient;
  std::function<Vector(const Vector&, double)> prox;  // (point, step)
  std::function<double(const Vector&)> nonsmooth_value;
};

// Proximal gradient descent with backtracking line search. The residual is
// ||g - prox(g - step * grad)|| / step, the norm of the composite gradient map.
SolveResult prox_gradient(const CompositeProblem& problem, Vector start,
                          const SolverSettings& settings);

// min ||y - g||_n^2 + pen(g) over R^n; the quadratic has gradient Lipschitz
// constant 2/n, so the fixed step n/2 solves it in one prox application.
SolveResult solve_regularized_ls(const Vector& y, const Penalty& penalty,
                                 const SolverSettings& settings = {});

// Composite gradient-map norm of the regularized least squares objective at g.
double optimality_residual(const Vector& y, const Vector& g, const Penalty& penalty);

// min P_n f_g + pen(g) over the family domain. Finite domains are enumerated;
// convex domains run proximal gradient, folding a differentiable penalty into
// the smooth part when the domain also constrains.
SolveResult solve_erm(const FunctionFamily& family, const Penalty& penalty, const Dataset& data,
                      const SolverSettings& settings = {});

// Shared assembly of the smooth/prox split for an objective
// smooth_core + pen over the family domain; used by solve_erm and tau_min.
CompositeProblem compose_with_domain(const FunctionFamily& family, const Penalty& penalty,
                                     std::function<double(const Vector&)> core_value,
                                     std::function<Vector(const Vector&)> core_gradient);

}  // namespace erm
