#include "erm/gaussian_direct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "erm/solver.hpp"

namespace erm {

namespace {

double norm_n(const Vector& v, int n) { return v.norm() / std::sqrt(static_cast<double>(n)); }

Vector draw_noise(std::mt19937_64& rng, int n, double sigma) {
  if (sigma == 0.0) return Vector::Zero(n);
  std::normal_distribution<double> gauss(0.0, sigma);
  Vector eps(n);
  for (int j = 0; j < n; ++j) eps[j] = gauss(rng);
  return eps;
}

Vector reference_point(const NormalSequenceSpec& spec) {
  if (spec.reference == NormalSequenceSpec::Reference::NoiselessMinimizer)
    return solve_regularized_ls(spec.g0, spec.penalty).minimizer;
  return spec.g0;
}

void validate(const NormalSequenceSpec& spec) {
  if (spec.n <= 0) throw ArgumentError("normal sequence model needs n >= 1");
  if (spec.g0.size() != spec.n) throw ArgumentError("g0 dimension must equal n");
  if (spec.sigma < 0.0) throw ArgumentError("sigma must be nonnegative");
}

}  // namespace

std::vector<double> simulate_deviations(const NormalSequenceSpec& spec, int workers) {
  validate(spec);
  if (spec.replicates < 2) throw ArgumentError("normal sequence model needs N >= 2 replicates");
  const Vector ref = reference_point(spec);
  std::vector<double> values(spec.replicates, 0.0);
  parallel_for(spec.replicates, workers, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(spec.seed, 0, i));
    const Vector y = spec.g0 + draw_noise(rng, spec.n, spec.sigma);
    const SolveResult fit = solve_regularized_ls(y, spec.penalty);
    values[i] = fit.converged ? norm_n(fit.minimizer - ref, spec.n)
                              : std::numeric_limits<double>::quiet_NaN();
  });
  return values;
}

MeanEstimate estimate_m0(const std::vector<double>& values) {
  if (values.size() < 2) throw ArgumentError("estimate_m0 needs at least two values");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var = values.size() > 1 ? var / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

ConcentrationReport tail_report(const NormalSequenceSpec& spec, const std::vector<double>& t_grid,
                                int workers) {
  if (spec.replicates < 4) throw ArgumentError("tail report needs at least 4 replicates");
  const std::vector<double> raw = simulate_deviations(spec, workers);

  std::vector<double> values;
  values.reserve(raw.size());
  std::size_t quarantined = 0;
  for (double v : raw) {
    if (std::isnan(v))
      ++quarantined;
    else
      values.push_back(v);
  }
  if (values.size() < 4) throw SolverFailure("tail report: too many quarantined replicates");

  const std::size_t half = values.size() / 2;
  const std::vector<double> head(values.begin(), values.begin() + half);
  const std::vector<double> tail(values.begin() + half, values.end());

  ConcentrationReport report;
  report.estimation_half = head.size();
  report.evaluation_half = tail.size();
  report.quarantined = quarantined;
  report.low_replicates = spec.replicates < 1000;
  const MeanEstimate m0 = estimate_m0(head);
  report.m0_hat = m0.mean;
  report.m0_se = m0.se;

  const double m = static_cast<double>(tail.size());
  auto exceed_frequency = [&](double threshold) {
    std::size_t count = 0;
    for (double v : tail)
      if (std::abs(v - m0.mean) >= threshold) ++count;
    return static_cast<double>(count) / m;
  };

  for (double t : t_grid) {
    TailRow row;
    row.t = t;
    row.threshold = spec.sigma * std::sqrt(2.0 * t / spec.n);
    row.bound = std::exp(-t);
    row.frequency = exceed_frequency(row.threshold);
    row.se = std::sqrt(row.frequency * (1.0 - row.frequency) / m);
    // Shifting the center by its 3-sigma error moves the frequency by at most
    // the same amount as shrinking the threshold; that shift caps the
    // propagation error.
    const double shrunk = std::max(0.0, row.threshold - 3.0 * m0.se);
    row.center_slack = std::max(0.0, exceed_frequency(shrunk) - row.frequency) / 3.0;
    row.flagged = row.frequency > row.bound + 3.0 * (row.se + row.center_slack);
    report.any_flagged = report.any_flagged || row.flagged;
    report.rows.push_back(row);
  }
  return report;
}

LipschitzReport lipschitz_check(const NormalSequenceSpec& spec, std::size_t pairs, int workers) {
  validate(spec);
  if (pairs == 0) throw ArgumentError("lipschitz check needs at least one pair");
  std::vector<double> ratios(pairs, 0.0);
  parallel_for(pairs, workers, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(spec.seed, 1, i));
    const Vector eps_a = draw_noise(rng, spec.n, spec.sigma);
    const Vector eps_b = draw_noise(rng, spec.n, spec.sigma);
    const SolveResult fit_a = solve_regularized_ls(spec.g0 + eps_a, spec.penalty);
    const SolveResult fit_b = solve_regularized_ls(spec.g0 + eps_b, spec.penalty);
    if (!fit_a.converged || !fit_b.converged) {
      ratios[i] = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    const double gap = norm_n(eps_a - eps_b, spec.n);
    ratios[i] = gap > 0.0 ? norm_n(fit_a.minimizer - fit_b.minimizer, spec.n) / gap : 0.0;
  });
  LipschitzReport report;
  for (double r : ratios) {
    if (std::isnan(r)) {
      ++report.quarantined;
      continue;
    }
    ++report.pairs;
    report.max_ratio = report.pairs == 1 ? r : std::max(report.max_ratio, r);
    report.min_ratio = report.pairs == 1 ? r : std::min(report.min_ratio, r);
  }
  if (report.pairs == 0) throw SolverFailure("lipschitz check: every pair quarantined");
  return report;
}

}  // namespace erm
