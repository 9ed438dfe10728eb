#include "erm/solver.hpp"

#include <cmath>
#include <limits>

namespace erm {

SolveResult prox_gradient(const CompositeProblem& problem, Vector start,
                          const SolverSettings& settings) {
  if (settings.tolerance <= 0.0) throw ArgumentError("solver: tolerance must be positive");
  if (settings.max_iterations < 1) throw ArgumentError("solver: max_iterations must be >= 1");
  SolveResult res;
  Vector g = std::move(start);
  double fg = problem.smooth_value(g);
  double step = settings.lipschitz ? 1.0 / *settings.lipschitz : settings.initial_step;
  const bool fixed = settings.lipschitz.has_value();
  int it = 0;
  for (; it < settings.max_iterations; ++it) {
    Vector grad = problem.smooth_gradient(g);
    Vector next;
    double fnext = 0.0;
    for (;;) {
      next = problem.prox(g - step * grad, step);
      fnext = problem.smooth_value(next);
      if (fixed) break;
      Vector d = next - g;
      double quad = fg + grad.dot(d) + d.squaredNorm() / (2.0 * step);
      if (fnext <= quad + 1e-14 * std::max(1.0, std::abs(quad))) break;
      step *= settings.backtracking;
      if (step < 1e-18) break;
    }
    double gap = (g - next).norm() / step;
    g = next;
    fg = fnext;
    if (gap <= settings.tolerance) {
      res.converged = true;
      res.residual = gap;
      ++it;
      break;
    }
    res.residual = gap;
  }
  res.minimizer = std::move(g);
  res.iterations = it;
  res.objective = fg + problem.nonsmooth_value(res.minimizer);
  return res;
}

namespace {

CompositeProblem regularized_ls_problem(const Vector& y, const Penalty& penalty) {
  const double n = static_cast<double>(y.size());
  CompositeProblem p;
  p.smooth_value = [y, n](const Vector& g) { return (y - g).squaredNorm() / n; };
  p.smooth_gradient = [y, n](const Vector& g) { return Vector((2.0 / n) * (g - y)); };
  p.prox = [penalty](const Vector& v, double eta) { return penalty.prox(v, eta); };
  p.nonsmooth_value = [penalty](const Vector& g) {
    double v = penalty.value(g);
    return std::isfinite(v) ? v : 0.0;  // projections keep iterates feasible
  };
  return p;
}

}  // namespace

SolveResult solve_regularized_ls(const Vector& y, const Penalty& penalty,
                                 const SolverSettings& settings) {
  if (y.size() == 0) throw ArgumentError("solve_regularized_ls: empty observation");
  SolverSettings s = settings;
  s.lipschitz = 2.0 / static_cast<double>(y.size());
  return prox_gradient(regularized_ls_problem(y, penalty), y, s);
}

double optimality_residual(const Vector& y, const Vector& g, const Penalty& penalty) {
  if (g.size() != y.size()) throw ArgumentError("optimality_residual: size mismatch");
  const double n = static_cast<double>(y.size());
  const double eta = n / 2.0;
  Vector grad = (2.0 / n) * (g - y);
  Vector p = penalty.prox(g - eta * grad, eta);
  return (g - p).norm() / eta;
}

CompositeProblem compose_with_domain(const FunctionFamily& family, const Penalty& penalty,
                                     std::function<double(const Vector&)> core_value,
                                     std::function<Vector(const Vector&)> core_gradient) {
  const ParameterDomain& dom = family.domain();
  if (dom.finite()) throw ArgumentError("compose_with_domain: finite domains are enumerated");
  const bool constrained = dom.set.kind() != ConvexSet::Kind::All;

  CompositeProblem p;
  if (!constrained) {
    p.smooth_value = std::move(core_value);
    p.smooth_gradient = std::move(core_gradient);
    p.prox = [penalty](const Vector& v, double eta) { return penalty.prox(v, eta); };
    p.nonsmooth_value = [penalty](const Vector& g) {
      double v = penalty.value(g);
      return std::isfinite(v) ? v : 0.0;
    };
    return p;
  }
  if (penalty.kind() == Penalty::Kind::Zero) {
    ConvexSet set = dom.set;
    p.smooth_value = std::move(core_value);
    p.smooth_gradient = std::move(core_gradient);
    p.prox = [set](const Vector& v, double) { return set.project(v); };
    p.nonsmooth_value = [](const Vector&) { return 0.0; };
    return p;
  }
  if (penalty.differentiable()) {
    // Constrained domain with a C1 penalty: penalty joins the smooth part.
    ConvexSet set = dom.set;
    p.smooth_value = [penalty, core = std::move(core_value)](const Vector& g) {
      return core(g) + penalty.value(g);
    };
    p.smooth_gradient = [penalty, core = std::move(core_gradient)](const Vector& g) {
      return Vector(core(g) + penalty.gradient(g));
    };
    p.prox = [set](const Vector& v, double) { return set.project(v); };
    p.nonsmooth_value = [](const Vector&) { return 0.0; };
    return p;
  }
  throw UnsupportedScenario(
      "compose_with_domain: indicator penalty combined with a constrained domain");
}

SolveResult solve_erm(const FunctionFamily& family, const Penalty& penalty, const Dataset& data,
                      const SolverSettings& settings) {
  const ParameterDomain& dom = family.domain();
  if (dom.finite()) {
    const auto* fin = dynamic_cast<const FiniteFamily*>(&family);
    SolveResult res;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dom.elements.size(); ++i) {
      const Vector& g = dom.elements[i];
      double emp = fin ? fin->member_empirical_mean(static_cast<int>(i), data) : [&] {
        double acc = 0.0;
        for (const auto& o : data.observations()) acc += family.evaluate(g, o);
        return acc / static_cast<double>(data.size());
      }();
      double obj = emp + penalty.value(g);
      if (obj < best) {
        best = obj;
        res.minimizer = g;
      }
    }
    res.objective = best;
    res.converged = true;
    res.iterations = static_cast<int>(dom.elements.size());
    return res;
  }

  auto value = [&family, &data](const Vector& g) {
    double acc = 0.0;
    for (const auto& o : data.observations()) acc += family.evaluate(g, o);
    return acc / static_cast<double>(data.size());
  };
  auto gradient = [&family, &data](const Vector& g) {
    Vector acc = Vector::Zero(g.size());
    for (const auto& o : data.observations()) acc += family.parameter_gradient(g, o);
    return Vector(acc / static_cast<double>(data.size()));
  };
  CompositeProblem p = compose_with_domain(family, penalty, value, gradient);
  Vector start = family.has_g0() ? family.g0() : Vector::Zero(family.dim());
  if (dom.set.kind() != ConvexSet::Kind::All) start = dom.set.project(start);
  return prox_gradient(p, start, settings);
}

}  // namespace erm
