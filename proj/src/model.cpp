#include "erm/model.hpp"

#include <cmath>
#include <limits>

namespace erm {

double empirical_mean(const FunctionFamily& family, const Vector& g, const Dataset& data) {
  if (!family.in_domain(g)) throw DomainViolation("empirical_mean: parameter outside domain");
  double acc = 0.0;
  for (const auto& o : data.observations()) acc += family.evaluate(g, o);
  return acc / static_cast<double>(data.size());
}

double excess_risk(const FunctionFamily& family, const Vector& g, const Penalty& penalty,
                   const PopulationOracle* oracle) {
  if (!family.in_domain(g)) throw DomainViolation("excess_risk: parameter outside domain");
  const Vector& g0 = family.g0();
  double risk;
  if (auto metric = family.pure_metric()) {
    Vector d = g - g0;
    risk = (metric->array() * d.array().square()).sum();
  } else if (auto pm = family.population_mean(g)) {
    risk = *pm - *family.population_mean(g0);
  } else if (oracle) {
    risk = oracle->mean([&](const Observation& o) {
      return family.evaluate(g, o) - family.evaluate(g0, o);
    });
  } else {
    throw UnsupportedScenario("excess_risk: no population route available");
  }
  return risk + penalty.value(g);
}

TauMinResult tau_min(const FunctionFamily& family, const Penalty& penalty,
                     const SolverSettings& settings) {
  TauMinResult out;
  const ParameterDomain& dom = family.domain();
  if (dom.finite()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : dom.elements) {
      double t = excess_risk(family, g, penalty);
      if (t < best) {
        best = t;
        out.minimizer = g;
      }
    }
    out.tau_min_sq = best;
    return out;
  }

  const Vector g0 = family.g0();
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  if (auto metric = family.pure_metric()) {
    Vector m = *metric;
    value = [m, g0](const Vector& g) {
      Vector d = g - g0;
      return (m.array() * d.array().square()).sum();
    };
    gradient = [m, g0](const Vector& g) { return Vector(2.0 * m.cwiseProduct(g - g0)); };
  } else if (family.population_mean(g0) && family.population_mean_gradient(g0)) {
    const FunctionFamily* fam = &family;
    value = [fam](const Vector& g) { return *fam->population_mean(g); };
    gradient = [fam](const Vector& g) { return *fam->population_mean_gradient(g); };
  } else {
    throw UnsupportedScenario("tau_min: no smooth population objective available");
  }

  CompositeProblem p = compose_with_domain(family, penalty, value, gradient);
  Vector start = dom.set.kind() == ConvexSet::Kind::All ? g0 : dom.set.project(g0);
  SolveResult res = prox_gradient(p, start, settings);
  out.minimizer = res.minimizer;
  out.converged = res.converged;
  // Report the excess risk of the solution, not the solver objective, so the
  // population-mean offset P f_g0 never enters.
  out.tau_min_sq = excess_risk(family, res.minimizer, penalty);
  return out;
}

}  // namespace erm
