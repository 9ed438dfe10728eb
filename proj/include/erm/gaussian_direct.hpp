#pragma once

#include <cstdint>

#include "erm/common.hpp"
#include "erm/penalty.hpp"

namespace erm {

// y = g0 + eps with eps ~ N(0, sigma^2 I_n); ghat minimizes
// ||y - g||_n^2 + pen(g). Replicates draw independent noise from seeds
// derived as (seed, replicate index).
struct NormalSequenceSpec {
  int n = 0;
  double sigma = 1.0;
  Vector g0;
  Penalty penalty = Penalty::zero();
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  // Reference point for the reported deviation ||ghat - ref||_n: the true
  // signal, or the noiseless penalized minimizer.
  enum class Reference { TrueSignal, NoiselessMinimizer } reference = Reference::TrueSignal;
};

struct TailRow {
  double t = 0.0;
  double threshold = 0.0;  // sigma * sqrt(2 t / n)
  double bound = 0.0;      // exp(-t)
  double frequency = 0.0;
  double se = 0.0;          // binomial SE of the frequency
  double center_slack = 0.0;  // propagation of the m0 estimate error
  bool flagged = false;
};

struct ConcentrationReport {
  double m0_hat = 0.0;
  double m0_se = 0.0;
  std::size_t estimation_half = 0;
  std::size_t evaluation_half = 0;
  std::size_t quarantined = 0;     // replicates dropped for solver failure
  bool low_replicates = false;     // warning only: N < 1000
  std::vector<TailRow> rows;
  bool any_flagged = false;
};

// ||ghat - ref||_n for each replicate; NaN marks a quarantined replicate
// (solver did not converge).
std::vector<double> simulate_deviations(const NormalSequenceSpec& spec, int workers = 1);

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;
};

MeanEstimate estimate_m0(const std::vector<double>& values);

// First half of the replicates estimates m0; the second half measures
// P(|value - m0_hat| >= sigma sqrt(2t/n)) against the bound exp(-t). A row is
// flagged when the frequency exceeds the bound by more than three times the
// binomial SE plus the m0 propagation slack.
ConcentrationReport tail_report(const NormalSequenceSpec& spec, const std::vector<double>& t_grid,
                                int workers = 1);

struct LipschitzReport {
  double max_ratio = 0.0;
  double min_ratio = 0.0;
  std::size_t pairs = 0;        // pairs that produced a ratio
  std::size_t quarantined = 0;  // pairs dropped for solver failure
};

// Ratios ||ghat(eps) - ghat(eps')||_n / ||eps - eps'||_n over independent
// noise pairs; strong convexity of the quadratic makes the map 1-Lipschitz
// for every convex penalty.
LipschitzReport lipschitz_check(const NormalSequenceSpec& spec, std::size_t pairs,
                                int workers = 1);

}  // namespace erm
