#include "erm/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "erm/common.hpp"
#include "erm/expfam.hpp"
#include "erm/family.hpp"
#include "erm/gaussian_direct.hpp"
#include "erm/io.hpp"
#include "erm/margin.hpp"
#include "erm/risk_curve.hpp"
#include "erm/runner.hpp"
#include "erm/scenarios.hpp"

namespace erm {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kSeed = 20260813ULL;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct AccCtx {
  std::filesystem::path dir;
  std::vector<ManifestEntry>* entries = nullptr;
  int workers = 1;

  void file(const std::string& name, const std::string& scenario, std::uint64_t seed,
            const std::string& text) const {
    write_text_file(dir / name, text);
    entries->push_back({name, scenario, seed, sha256_hex(text)});
  }
};

std::string fmt(double v) { return format_number(v); }

double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

CsvTable tail_table(const ConcentrationReport& rep) {
  CsvTable t;
  t.header = {"t", "bound", "freq", "se", "flagged"};
  for (const TailRow& row : rep.rows) {
    t.rows.push_back({fmt(row.t), fmt(row.bound), fmt(row.frequency), fmt(row.se),
                      row.flagged ? "1" : "0"});
  }
  return t;
}

CsvTable curve_csv(const RiskCurve& curve) {
  CsvTable t;
  t.header = {"s", "value", "se", "flag"};
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    t.rows.push_back({fmt(curve.grid.points[i]), fmt(curve.values[i]), fmt(curve.ses[i]),
                      curve.flags[i] ? "1" : "0"});
  }
  return t;
}

struct NamedPenalty {
  std::string name;
  Penalty penalty;
};

// The four penalties of the sequence-model criteria: none, empirical-norm
// ridge at two weights, and a box constraint.
std::vector<NamedPenalty> direct_penalties(int n) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<NamedPenalty> out;
  out.push_back({"zero", Penalty::zero()});
  out.push_back({"ridge-0.1", Penalty::squared(0.1, Seminorm::scaled_l2(inv))});
  out.push_back({"ridge-1", Penalty::squared(1.0, Seminorm::scaled_l2(inv))});
  out.push_back({"box", Penalty::indicator(ConvexSet::box(Vector::Constant(n, -1.0),
                                                          Vector::Constant(n, 1.0)))});
  return out;
}

Dataset gaussian_dataset(int dim, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Observation> obs(static_cast<std::size_t>(n));
  for (auto& o : obs) {
    o.x = Vector::NullaryExpr(dim, [&](Eigen::Index) { return normal(rng); });
  }
  return Dataset(SampleKind::Vector, std::move(obs));
}

// 1: tail dominance of the deviation bound across penalties at n=200.
CriterionResult criterion_tail_dominance(const AccCtx& ctx) {
  CriterionResult res{1, "tail dominance across penalties", false, "", 0.0};
  Timer timer;
  const int n = 200;
  const std::vector<double> ts{0.25, 0.5, 1.0, 2.0, 3.0, 4.0};
  bool clean = true;
  std::string flagged_names;
  for (const auto& [name, penalty] : direct_penalties(n)) {
    NormalSequenceSpec spec;
    spec.n = n;
    spec.sigma = 1.0;
    spec.g0 = Vector::Zero(n);
    spec.penalty = penalty;
    spec.replicates = 100000;
    spec.seed = derive_seed(kSeed, 1, std::hash<std::string>{}(name));
    const ConcentrationReport rep = tail_report(spec, ts, ctx.workers);
    ctx.file("01-tail-" + name + ".csv", "accept-01", spec.seed, to_csv(tail_table(rep)));
    if (rep.any_flagged) {
      clean = false;
      flagged_names += (flagged_names.empty() ? "" : ",") + name;
    }
  }
  res.seconds = timer.seconds();
  const bool in_budget = res.seconds <= 120.0;
  res.pass = clean && in_budget;
  res.detail = "n=200, N=100000, t up to 4; " +
               std::string(clean ? "zero flagged rows" : "flags in " + flagged_names) +
               (in_budget ? "" : "; over the 120 s budget");
  return res;
}

// 2: the noise-to-estimate map is 1-Lipschitz; ridge weight 1 halves exactly.
CriterionResult criterion_lipschitz(const AccCtx& ctx) {
  CriterionResult res{2, "estimator Lipschitz ratios", false, "", 0.0};
  Timer timer;
  const int n = 200;
  bool pass = true;
  double worst = 0.0;
  double ridge_err = 0.0;
  for (const auto& [name, penalty] : direct_penalties(n)) {
    NormalSequenceSpec spec;
    spec.n = n;
    spec.sigma = 1.0;
    spec.g0 = Vector::Zero(n);
    spec.penalty = penalty;
    spec.seed = derive_seed(kSeed, 2, std::hash<std::string>{}(name));
    const LipschitzReport rep = lipschitz_check(spec, 1000, ctx.workers);
    worst = std::max(worst, rep.max_ratio);
    if (rep.max_ratio > 1.0 + 1e-6) pass = false;
    if (name == "ridge-1") {
      ridge_err = std::max(std::abs(rep.max_ratio - 0.5), std::abs(rep.min_ratio - 0.5));
      if (ridge_err > 1e-9) pass = false;
    }
  }
  res.seconds = timer.seconds();
  res.pass = pass;
  res.detail = "max ratio " + fmt(worst) + ", ridge-1 deviation from 0.5: " + fmt(ridge_err);
  ctx.file("02-lipschitz.json", "accept-02", kSeed,
           ordered_json{{"max_ratio", worst}, {"ridge1_error", ridge_err}}.dump(2) + "\n");
  return res;
}

FiniteFamily random_finite_family(std::mt19937_64& rng, int members, int support_size) {
  std::vector<double> support(support_size);
  for (int k = 0; k < support_size; ++k) support[k] = k;
  Vector probs(support_size);
  double total = 0.0;
  for (int k = 0; k < support_size; ++k) {
    probs[k] = 0.1 + uniform_in(rng, 0.0, 1.0);
    total += probs[k];
  }
  probs /= total;
  Matrix values(members, support_size);
  for (int i = 0; i < members; ++i) {
    for (int k = 0; k < support_size; ++k) values(i, k) = uniform_in(rng, -1.0, 1.0);
  }
  std::vector<Vector> params;
  params.reserve(members);
  for (int i = 0; i < members; ++i) params.push_back(Vector::Constant(1, double(i)));
  return FiniteFamily(std::move(params), std::move(support), std::move(values), std::move(probs));
}

Dataset draw_from_finite(const FiniteFamily& family, int n, std::mt19937_64& rng) {
  const auto& support = family.support();
  const Vector& probs = family.probabilities();
  std::vector<double> cumulative(support.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    acc += probs[static_cast<Eigen::Index>(k)];
    cumulative[k] = acc;
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (auto& x : xs) {
    const double u = uniform(rng);
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    x = support[std::min<std::size_t>(it - cumulative.begin(), support.size() - 1)];
  }
  return Dataset::scalars(xs);
}

// 3: the minimum lemma, exactly on finite families and at grid resolution on
// ball-constrained Gaussian mean estimation.
CriterionResult criterion_minimum_lemma(const AccCtx& ctx) {
  CriterionResult res{3, "minimum lemma identification", false, "", 0.0};
  Timer timer;
  std::mt19937_64 rng(derive_seed(kSeed, 3, 0));
  int exact_failures = 0;
  double worst_exact_gap = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int members = 5 + static_cast<int>(rng() % 16);
    const int support_size = 3 + static_cast<int>(rng() % 4);
    FiniteFamily family = random_finite_family(rng, members, support_size);
    int best = 0;
    for (int i = 1; i < family.size(); ++i) {
      if (family.member_population_mean(i) < family.member_population_mean(best)) best = i;
    }
    family.register_g0(family.member(best));
    const Penalty penalty = (trial % 2 == 0)
                                ? Penalty::zero()
                                : Penalty::squared(0.3, Seminorm::scaled_l2(0.2));
    const int n = (trial % 4 < 2) ? 20 : 100;
    const Dataset data = draw_from_finite(family, n, rng);
    const MinimumLemmaReport rep = verify_minimum_lemma(family, penalty, data, nullptr);
    if (!rep.exact || rep.gap != 0.0) ++exact_failures;
    worst_exact_gap = std::max(worst_exact_gap, rep.gap);
  }

  double worst_grid_gap = 0.0;
  const SGrid grid = SGrid::uniform(1e-6, 1.2, 1e-3);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 3;
    Vector center(dim);
    for (int j = 0; j < dim; ++j) center[j] = uniform_in(rng, -0.5, 0.5);
    GaussianMeanFamily family(center, ConvexSet::ball(center, 1.0));
    family.register_g0(center);
    const Dataset data = gaussian_dataset(dim, 50, derive_seed(kSeed, 30, trial));
    const MinimumLemmaReport rep =
        verify_minimum_lemma(family, Penalty::zero(), data, nullptr, grid);
    worst_grid_gap = std::max(worst_grid_gap, rep.gap);
  }
  res.seconds = timer.seconds();
  res.pass = exact_failures == 0 && worst_grid_gap <= 1e-3 + 1e-6;
  res.detail = "finite failures " + std::to_string(exact_failures) + "/100, ball gap " +
               fmt(worst_grid_gap) + " vs 0.001001";
  ctx.file("03-minimum-lemma.json", "accept-03", kSeed,
           ordered_json{{"exact_failures", exact_failures},
                        {"worst_exact_gap", worst_exact_gap},
                        {"worst_grid_gap", worst_grid_gap}}
                   .dump(2) +
               "\n");
  return res;
}

// 4: concavity of the variance-constrained curve for linear processes, with a
// handcrafted nonlinear step curve as the negative control.
CriterionResult criterion_concavity(const AccCtx& ctx) {
  CriterionResult res{4, "variance-curve concavity", false, "", 0.0};
  Timer timer;
  const SGrid grid = SGrid::geometric(0.1, 2.0, 1.1);
  int failures = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 2 + trial % 5;
    GaussianMeanFamily family(Vector::Zero(dim), ConvexSet::all(dim));
    family.register_g0(Vector::Zero(dim));
    const Penalty penalty = (trial % 2 == 0)
                                ? Penalty::zero()
                                : Penalty::squared(0.2 + 0.1 * (trial % 3), Seminorm::l2());
    const double c = std::array<double, 3>{0.5, 1.0, 2.0}[trial % 3];
    const Dataset data = gaussian_dataset(dim, 40, derive_seed(kSeed, 4, trial));
    const RiskCurve curve = varsigma_curve(family, penalty, data, nullptr, c, grid);
    const ConcavityReport rep = concavity_check(curve, 1e-8);
    if (!rep.pass) ++failures;
    worst = std::max(worst, rep.worst_violation);
  }

  // Step curve over member variances 1 and 4: flat then a jump, so the
  // midpoint at s=1.5 sits strictly below the chord.
  std::vector<Vector> params{Vector::Constant(1, 0.0), Vector::Constant(1, 1.0),
                             Vector::Constant(1, 2.0)};
  Matrix values(3, 2);
  values << 0.0, 0.0, 1.0, -1.0, 2.0, -2.0;
  FiniteFamily step_family(std::move(params), {0.0, 1.0}, std::move(values),
                           Vector::Constant(2, 0.5));
  step_family.register_g0(Vector::Constant(1, 0.0));
  const Dataset step_data = Dataset::scalars({0.0, 1.0, 1.0, 1.0});
  const RiskCurve step_curve =
      varsigma_curve(step_family, Penalty::zero(), step_data, nullptr, 1.0,
                     SGrid::explicit_points({1.0, 1.5, 2.0}));
  const ConcavityReport control = concavity_check(step_curve, 1e-8);

  res.seconds = timer.seconds();
  res.pass = failures == 0 && !control.pass;
  res.detail = "linear failures " + std::to_string(failures) + "/50, control violation " +
               fmt(control.worst_violation);
  ctx.file("04-concavity.json", "accept-04", kSeed,
           ordered_json{{"linear_failures", failures},
                        {"worst_linear_violation", worst},
                        {"control_violates", !control.pass},
                        {"control_violation", control.worst_violation}}
                   .dump(2) +
               "\n");
  return res;
}

// 5: quadratic margin of the mean curve in the pure Gaussian case.
CriterionResult criterion_quadratic_margin(const AccCtx& ctx) {
  CriterionResult res{5, "quadratic margin of the mean curve", false, "", 0.0};
  Timer timer;
  const int dim = 8;
  const int n = 32;
  GaussianMeanFamily family(Vector::Zero(dim), ConvexSet::all(dim));
  family.register_g0(Vector::Zero(dim));
  MeanCurveSpec spec;
  spec.replicates = 200;
  spec.seed = derive_seed(kSeed, 5, 0);
  spec.workers = ctx.workers;
  spec.sampler = [dim, n](std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Observation> obs(static_cast<std::size_t>(n));
    for (auto& o : obs) {
      o.x = Vector::NullaryExpr(dim, [&](Eigen::Index) { return normal(rng); });
    }
    return Dataset(SampleKind::Vector, std::move(obs));
  };
  const SGrid grid = SGrid::geometric(0.1, 1.0, 1.02);
  const RiskCurve curve = mean_E_curve(family, Penalty::zero(), spec, nullptr, grid);
  ctx.file("05-mean-curve.csv", "accept-05", spec.seed, to_csv(curve_csv(curve)));
  const double s0 = argmin_curve(curve).s;
  // G(u) = u^2 exactly: quadratic margin constant 1 at q = 2.
  const MarginCertificate cert =
      check_margin(curve, s0, MarginFunction::quadratic(1.0 / std::sqrt(2.0)), 0.0);
  bool constants_exact = true;
  for (double m : {0.1, 1.0, 10.0}) {
    if (quadratic_margin_constant(2.0, m) != 1.0) constants_exact = false;
  }
  res.seconds = timer.seconds();
  res.pass = cert.pass && constants_exact;
  res.detail = "s0 " + fmt(s0) + ", worst margin " + fmt(cert.worst_margin) +
               ", q=2 constant exact: " + (constants_exact ? "yes" : "no");
  ctx.file("05-margin.json", "accept-05", spec.seed,
           ordered_json{{"s0", s0},
                        {"worst_margin", cert.worst_margin},
                        {"tested_points", cert.tested_points},
                        {"constants_exact", constants_exact}}
                   .dump(2) +
               "\n");
  return res;
}

// 6: conjugate machinery against closed forms.
CriterionResult criterion_fenchel(const AccCtx& ctx) {
  CriterionResult res{6, "conjugates, Fenchel-Young, base radius", false, "", 0.0};
  Timer timer;
  double worst_quad = 0.0;
  const MarginFunction Gq = MarginFunction::quadratic(1.3);
  for (int k = 0; k < 100; ++k) {
    const double v = 3.0 * k / 99.0;
    const double closed = 1.3 * 1.3 * v * v / 2.0;
    const double numeric =
        fenchel_conjugate([&Gq](double u) { return Gq(u); }, v, 0.0, 60.0).value;
    worst_quad = std::max(worst_quad, std::abs(numeric - closed));
  }

  const IndexFunction J{1.5, 0.8, 0.0};
  const PhiR0Result pr = phi_and_r0(J, 10.0, 1.0, 1.0);
  const double r = 2.0 / 0.8;
  double worst_power = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double v = 0.01 + (2.0 - 0.01) * k / 99.0;
    const double ustar = std::pow(v * std::pow(1.5, r) / r, 1.0 / (r - 1.0));
    const double closed = ustar * v * (1.0 - 1.0 / r);
    const double numeric = fenchel_conjugate(pr.phi, v, 0.0, 30.0).value;
    worst_power = std::max(worst_power, std::abs(numeric - closed));
  }

  std::mt19937_64 rng(derive_seed(kSeed, 6, 0));
  const MarginFunction Gt =
      MarginFunction::tabulated({0.0, 0.5, 1.0, 2.0, 4.0}, {0.0, 0.2, 0.9, 3.5, 15.0});
  int fy_failures = 0;
  for (int k = 0; k < 1000; ++k) {
    const double u = uniform_in(rng, 0.0, 4.0);
    const double v = uniform_in(rng, 0.0, 6.0);
    if (Gq(u) + Gq.conjugate(v) < u * v - 1e-9) ++fy_failures;
    if (Gt(u) + Gt.conjugate(v) < u * v - 1e-9) ++fy_failures;
  }

  double worst_r0 = 0.0;
  for (int n : {100, 1000, 4000, 123456}) {
    const PhiR0Result base = phi_and_r0(IndexFunction{1.0, 1.0, 0.0},
                                        std::sqrt(static_cast<double>(n)), 1.0, 1.0);
    worst_r0 = std::max(worst_r0, std::abs(base.r0_sq - 8.0 / n));
  }

  res.seconds = timer.seconds();
  res.pass = worst_quad <= 1e-7 && worst_power <= 1e-7 && fy_failures == 0 && worst_r0 <= 1e-12;
  res.detail = "conjugate errors " + fmt(worst_quad) + " / " + fmt(worst_power) +
               ", FY failures " + std::to_string(fy_failures) + ", r0 error " + fmt(worst_r0);
  ctx.file("06-fenchel.json", "accept-06", kSeed,
           ordered_json{{"quadratic_error", worst_quad},
                        {"power_error", worst_power},
                        {"fenchel_young_failures", fy_failures},
                        {"r0_error", worst_r0}}
                   .dump(2) +
               "\n");
  return res;
}

// 7: empirical coverage of the bounded-process deviation interval.
CriterionResult criterion_coverage(const AccCtx& ctx) {
  CriterionResult res{7, "deviation interval coverage", false, "", 0.0};
  Timer timer;
  const int n = 500;
  const std::vector<double> support{0.0, 1.0, 2.0};
  const Vector probs = (Vector(3) << 0.5, 0.3, 0.2).finished();

  // Six members; member 0 is the population minimizer and the margins below
  // are the exact excess risks.
  const int members = 6;
  const std::vector<double> margins{0.0, 0.02, 0.05, 0.1, 0.2, 0.3};
  std::mt19937_64 shape_rng(derive_seed(kSeed, 7, 0));
  Matrix values(members, 3);
  values.row(0).setZero();
  for (int i = 1; i < members; ++i) {
    Vector shape(3);
    for (int k = 0; k < 3; ++k) shape[k] = uniform_in(shape_rng, -0.8, 0.8);
    const double mean = shape.dot(probs);
    for (int k = 0; k < 3; ++k) values(i, k) = shape[k] - mean + margins[i];
  }
  std::vector<Vector> params;
  for (int i = 0; i < members; ++i) params.push_back(Vector::Constant(1, double(i)));
  FiniteFamily family(params, support, values, probs);
  family.register_g0(params[0]);

  const double s = std::sqrt(0.12);
  std::vector<int> feasible;
  for (int i = 0; i < members; ++i) {
    if (margins[i] <= s * s + 1e-12) feasible.push_back(i);
  }
  double K = 0.0;
  double sigma_s_sq = 0.0;
  for (int i : feasible) {
    for (int k = 0; k < 3; ++k) K = std::max(K, std::abs(values(i, k) - values(0, k)));
    sigma_s_sq = std::max(sigma_s_sq, family.member_variance(i, 0));
  }

  // sup over feasible members of (P_n - P)(f_0 - f_i) from category counts.
  auto sup_process = [&](const std::array<int, 3>& counts) {
    double best = 0.0;
    for (int i : feasible) {
      double gain = 0.0;
      for (int k = 0; k < 3; ++k) {
        gain += (double(counts[k]) / n - probs[k]) * (values(0, k) - values(i, k));
      }
      best = std::max(best, gain);
    }
    return best;
  };
  auto draw_counts = [&](std::mt19937_64& rng) {
    std::array<int, 3> counts{0, 0, 0};
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      const double u = uniform(rng);
      counts[u < probs[0] ? 0 : (u < probs[0] + probs[1] ? 1 : 2)]++;
    }
    return counts;
  };

  // Dual route: the direct count formula must match the library enumeration.
  for (int rep = 0; rep < 10; ++rep) {
    std::mt19937_64 rng(derive_seed(kSeed, 71, rep));
    const auto counts = draw_counts(rng);
    std::vector<double> xs;
    for (int k = 0; k < 3; ++k) xs.insert(xs.end(), counts[k], support[k]);
    const double via_library =
        hat_E(family, Penalty::zero(), Dataset::scalars(xs), nullptr, s);
    if (std::abs(via_library - sup_process(counts)) > 1e-12) {
      res.detail = "count formula disagrees with enumeration";
      res.seconds = timer.seconds();
      return res;
    }
  }

  const std::size_t mean_reps = 200000;
  double mean_acc = 0.0;
  for (std::size_t rep = 0; rep < mean_reps; ++rep) {
    std::mt19937_64 rng(derive_seed(kSeed, 72, rep));
    mean_acc += sup_process(draw_counts(rng));
  }
  const double E_s = mean_acc / double(mean_reps);

  const std::size_t cover_reps = 10000;
  std::vector<double> sups(cover_reps);
  for (std::size_t rep = 0; rep < cover_reps; ++rep) {
    std::mt19937_64 rng(derive_seed(kSeed, 73, rep));
    sups[rep] = sup_process(draw_counts(rng));
  }

  bool pass = true;
  std::string freqs;
  ordered_json rows = ordered_json::array();
  for (double t : {1.0, 2.0, 3.0}) {
    const BoundInterval interval = klein_rio_interval(K, sigma_s_sq, E_s, t, n);
    std::size_t outside = 0;
    for (double v : sups) {
      if (v < interval.lower || v > interval.upper) ++outside;
    }
    const double freq = double(outside) / double(cover_reps);
    const double se = std::sqrt(freq * (1.0 - freq) / double(cover_reps));
    const double budget = 2.0 * std::exp(-t) + 3.0 * se;
    if (freq > budget) pass = false;
    freqs += (freqs.empty() ? "" : ", ") + fmt(freq) + "<=" + fmt(budget);
    rows.push_back({{"t", t}, {"frequency", freq}, {"budget", budget}});
  }
  res.seconds = timer.seconds();
  res.pass = pass;
  res.detail = "coverage " + freqs;
  ctx.file("07-coverage.json", "accept-07", kSeed,
           ordered_json{{"K", K}, {"sigma_s_sq", sigma_s_sq}, {"E_s", E_s}, {"rows", rows}}
                   .dump(2) +
               "\n");
  return res;
}

// 8: log-partition Taylor control: stable third-order rate for skewed
// families, and the symmetric two-point value against its series.
CriterionResult criterion_expfam(const AccCtx& ctx) {
  CriterionResult res{8, "log-partition Taylor control", false, "", 0.0};
  Timer timer;
  std::vector<double> t_grid;
  for (int k = 0; k <= 12; ++k) t_grid.push_back(std::pow(10.0, -1.0 - 0.25 * k));

  auto stable = [](const TaylorReport& rep) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const TaylorRow& row : rep.rows) {
      lo = std::min(lo, row.deviation_rate);
      hi = std::max(hi, row.deviation_rate);
    }
    return hi <= 2.0 * std::max(lo, 1e-12);
  };

  ExpFamily two_point(BaseMeasure::discrete({-1.0, 1.0}, {0.3, 0.7}),
                      {[](double x) { return x; }}, ConvexSet::ball(Vector::Zero(1), 10.0));
  const TaylorReport skew = taylor_ratio(two_point, Vector::Ones(1), t_grid);

  ExpFamily quadrature(BaseMeasure::interval(0.0, 3.0, [](double x) { return std::exp(-x); }),
                       {[](double x) { return x; }}, ConvexSet::ball(Vector::Zero(1), 10.0));
  const TaylorReport smooth = taylor_ratio(quadrature, Vector::Ones(1), t_grid);

  ExpFamily symmetric(BaseMeasure::discrete({-1.0, 1.0}, {0.5, 0.5}),
                      {[](double x) { return x; }}, ConvexSet::ball(Vector::Zero(1), 10.0));
  const TaylorReport sym = taylor_ratio(symmetric, Vector::Ones(1), {0.01});
  const double ratio = sym.rows.front().ratio;
  const double t = 0.01;
  const double series = 0.5 - t * t / 12.0 + std::pow(t, 4) / 45.0;

  const bool skew_ok = stable(skew);
  const bool smooth_ok = stable(smooth);
  const bool pinned_ok = std::abs(ratio - 0.4999917) <= 1e-6;
  const bool series_ok = std::abs(ratio - series) <= 1e-8;
  res.seconds = timer.seconds();
  res.pass = skew_ok && smooth_ok && pinned_ok && series_ok;
  res.detail = "two-point ratio(0.01) " + fmt(ratio) + " vs series " + fmt(series) +
               "; rate stability " + (skew_ok ? "yes" : "no") + "/" +
               (smooth_ok ? "yes" : "no");

  CsvTable table;
  table.header = {"t", "ratio", "deviation_rate"};
  for (const TaylorRow& row : skew.rows) {
    table.rows.push_back({fmt(row.t), fmt(row.ratio), fmt(row.deviation_rate)});
  }
  ctx.file("08-two-point-taylor.csv", "accept-08", kSeed, to_csv(table));
  return res;
}

// 9: the no-penalty rate study reproduces the designed n^(-1/4) slope.
CriterionResult criterion_rate(const AccCtx& ctx) {
  CriterionResult res{9, "concentration point rate, no-penalty case", false, "", 0.0};
  Timer timer;
  ProjectionConfig config;
  config.case_id = 1;
  config.alpha = 1.0;
  config.n_list = {250, 500, 1000, 2000, 4000, 8000};
  config.replicates = 100;
  config.seed = derive_seed(kSeed, 9, 0);
  config.workers = ctx.workers;
  const ProjectionResult run = run_projection_case(config);
  res.seconds = timer.seconds();

  CsvTable table;
  table.header = {"n", "s0", "s0_se", "majorant_constant"};
  for (const ProjectionPoint& pt : run.per_n) {
    table.rows.push_back(
        {fmt(pt.n), fmt(pt.s0), fmt(pt.s0_se), fmt(pt.majorant_constant)});
  }
  ctx.file("09-rate.csv", "accept-09", config.seed, to_csv(table));

  const double err = std::abs(run.rate.slope - (-0.25));
  const bool in_band = err <= 0.0375;  // 15% of 1/4
  const bool in_budget = res.seconds <= 600.0;
  res.pass = in_band && in_budget;
  res.detail = "slope " + fmt(run.rate.slope) + " vs -0.25 (band 0.0375)" +
               (in_budget ? "" : "; over the 600 s budget");
  ctx.file("09-rate.json", "accept-09", config.seed,
           ordered_json{{"slope", run.rate.slope},
                        {"slope_low", run.rate.slope_low},
                        {"slope_high", run.rate.slope_high},
                        {"target", run.rate.target},
                        {"seconds", res.seconds}}
                   .dump(2) +
               "\n");
  return res;
}

// 10: shifted-curve algebra: the exact identity, the ordering inequality, and
// parity of the shifted bound at a zero shift.
CriterionResult criterion_shifted(const AccCtx& ctx) {
  CriterionResult res{10, "shifted-curve identities", false, "", 0.0};
  Timer timer;
  const int dim = 6;
  GaussianMeanFamily family(Vector::Zero(dim), ConvexSet::all(dim));
  family.register_g0(Vector::Zero(dim));
  const Penalty penalty = Penalty::squared(0.4, Seminorm::l2());
  const Dataset data = gaussian_dataset(dim, 30, derive_seed(kSeed, 10, 0));
  const double tau_star_sq = 0.3;
  const SGrid grid_tilde = SGrid::geometric(0.56, 1.5, 1.1);
  const RiskCurve shifted = shifted_curve(family, penalty, data, nullptr, tau_star_sq, grid_tilde);
  double worst_identity = 0.0;
  for (std::size_t k = 0; k < grid_tilde.size(); ++k) {
    const double st = grid_tilde.points[k];
    const double s = std::sqrt(tau_star_sq + st * st);
    const double lhs = st * st - shifted.values[k];
    const double rhs = (s * s - hat_E(family, penalty, data, nullptr, s)) - tau_star_sq;
    worst_identity = std::max(worst_identity, std::abs(lhs - rhs));
  }

  std::mt19937_64 rng(derive_seed(kSeed, 10, 1));
  int ordering_failures = 0;
  for (int k = 0; k < 10000; ++k) {
    const double tss = uniform_in(rng, 0.0, 2.0);
    const double st = uniform_in(rng, 0.0, 3.0);
    const double st0 = uniform_in(rng, 0.0, 3.0);
    const double s = std::sqrt(tss + st * st);
    const double s0 = std::sqrt(tss + st0 * st0);
    if (!shifted_ordering_check(s, s0, tss).holds) ++ordering_failures;
  }

  double worst_parity = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double t = uniform_in(rng, 0.5, 3.0);
    const double n = 200.0 + 4800.0 * uniform_in(rng, 0.0, 1.0);
    const double tau_max = uniform_in(rng, 0.5, 2.0);
    const double s0 = uniform_in(rng, 0.05, 0.5);
    const double r0 = uniform_in(rng, 0.01, 0.3);
    const MarginFunction G = MarginFunction::quadratic(uniform_in(rng, 0.5, 2.0));
    const double C = uniform_in(rng, 1.0, 2.0);
    const double K = uniform_in(rng, 1.0, 2.0);
    const double plain = delta_bound(t, n, tau_max, s0, r0, G, C, K);
    const double via_shift = delta_bound_shifted(t, n, tau_max, 0.0, s0, r0, G, C, K, 1.0);
    worst_parity = std::max(worst_parity, std::abs(plain - via_shift));
  }

  res.seconds = timer.seconds();
  res.pass = worst_identity <= 1e-12 && ordering_failures == 0 && worst_parity <= 1e-12;
  res.detail = "identity error " + fmt(worst_identity) + ", ordering failures " +
               std::to_string(ordering_failures) + ", zero-shift parity error " +
               fmt(worst_parity);
  ctx.file("10-shifted.json", "accept-10", kSeed,
           ordered_json{{"identity_error", worst_identity},
                        {"ordering_failures", ordering_failures},
                        {"parity_error", worst_parity}}
                   .dump(2) +
               "\n");
  return res;
}

RunConfig determinism_config(const std::filesystem::path& out_dir, int workers) {
  RunConfig config;
  config.seed = kSeed;
  config.workers = workers;
  config.out_dir = out_dir;
  config.scenarios.push_back(ordered_json{{"id", "normal-sequence"},
                                          {"n", 100},
                                          {"replicates", 20000},
                                          {"penalty", {{"kind", "ridge"}, {"lambda", 0.1}}},
                                          {"lipschitz_pairs", 200}});
  config.scenarios.push_back(ordered_json{{"id", "gaussian-curve"},
                                          {"dim", 6},
                                          {"n", 40},
                                          {"replicates", 100},
                                          {"penalty", {{"kind", "squared"}, {"lambda", 0.5}}},
                                          {"concavity_c", 1.0}});
  config.scenarios.push_back(ordered_json{{"id", "projection-case2"},
                                          {"alpha", 0.5},
                                          {"n_list", {400, 800}},
                                          {"replicates", 20},
                                          {"erm_replicates", 10},
                                          {"basis_dim", 64}});
  config.scenarios.push_back(ordered_json{
      {"id", "linearized-ls"}, {"n_list", {200, 400}}, {"envelope_draws", 500000}});
  config.scenarios.push_back(ordered_json{{"id", "margin-table"},
                                          {"n", 2000.0},
                                          {"tau_max", 1.0},
                                          {"s0", 0.1},
                                          {"r0", 0.1},
                                          {"sigma_s_sq", 0.02},
                                          {"E_s", 0.05},
                                          {"s", 0.5},
                                          {"curvature", true}});
  config.scenarios.push_back(
      ordered_json{{"id", "expfam-density"},
                   {"base",
                    {{"kind", "two-point"}, {"points", {-1.0, 1.0}}, {"weights", {0.3, 0.7}}}},
                   {"theta", {1.0}},
                   {"fit", {{"n", 500}, {"theta_star", {0.8}}}}});
  config.scenarios.push_back(ordered_json{
      {"id", "expfam-regression"},
      {"link", {{"kind", "exponential"}, {"lo", -1.0}, {"hi", 1.5}}},
      {"n", 60},
      {"xi_true", {{"lo", -0.5}, {"hi", 1.2}}}});
  return config;
}

// 11: a rerun with the same config, at a different worker count, reproduces
// every artifact byte for byte.
CriterionResult criterion_determinism(const AccCtx& ctx) {
  CriterionResult res{11, "byte-identical rerun", false, "", 0.0};
  Timer timer;
  std::ostringstream sink;
  const auto dir_a = ctx.dir / "rerun-a";
  const auto dir_b = ctx.dir / "rerun-b";
  const int code_a = run(determinism_config(dir_a, 1), sink);
  const int code_b = run(determinism_config(dir_b, 2), sink);

  const auto entries_a = read_manifest(dir_a / "manifest.json");
  const auto entries_b = read_manifest(dir_b / "manifest.json");
  bool identical = entries_a.size() == entries_b.size();
  std::string first_diff;
  if (identical) {
    for (std::size_t i = 0; i < entries_a.size(); ++i) {
      if (entries_a[i].file != entries_b[i].file ||
          entries_a[i].sha256 != entries_b[i].sha256) {
        identical = false;
        first_diff = entries_a[i].file;
        break;
      }
    }
  }
  const bool manifest_bytes_equal =
      read_text_file(dir_a / "manifest.json") == read_text_file(dir_b / "manifest.json");

  for (const auto& sub : {dir_a, dir_b}) {
    const std::string stem = sub.filename().string();
    for (const auto& e : read_manifest(sub / "manifest.json")) {
      ctx.entries->push_back({stem + "/" + e.file, e.scenario, e.seed, e.sha256});
    }
    ctx.entries->push_back(
        {stem + "/manifest.json", "accept-11", kSeed, sha256_file(sub / "manifest.json")});
  }

  res.seconds = timer.seconds();
  res.pass = identical && manifest_bytes_equal && code_a == code_b;
  res.detail = identical && manifest_bytes_equal
                   ? "workers 1 vs 2: " + std::to_string(entries_a.size()) +
                         " files hash-identical, exit " + std::to_string(code_a)
                   : "first differing file: " + (first_diff.empty() ? "manifest" : first_diff);
  return res;
}

}  // namespace

AcceptanceReport run_acceptance(const std::filesystem::path& out_dir, int workers,
                                std::ostream& log) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    (void)entry;
    throw ArgumentError("accept: output directory not empty: " + out_dir.string());
  }

  std::vector<ManifestEntry> entries;
  AccCtx ctx{out_dir, &entries, workers};

  using Runner = CriterionResult (*)(const AccCtx&);
  const Runner runners[] = {
      criterion_tail_dominance, criterion_lipschitz, criterion_minimum_lemma,
      criterion_concavity,      criterion_quadratic_margin,
      criterion_fenchel,        criterion_coverage,  criterion_expfam,
      criterion_rate,           criterion_shifted,   criterion_determinism};

  AcceptanceReport report;
  report.all_pass = true;
  int id = 1;
  for (Runner runner : runners) {
    CriterionResult result;
    try {
      result = runner(ctx);
    } catch (const std::exception& ex) {
      result.id = id;
      result.title = "criterion aborted";
      result.pass = false;
      result.detail = ex.what();
    }
    result.id = id;
    char index[8];
    std::snprintf(index, sizeof(index), "%02d", result.id);
    log << "criterion " << index << " " << (result.pass ? "PASS" : "FAIL") << " ["
        << format_number(std::round(result.seconds * 10.0) / 10.0) << "s] " << result.title
        << ": " << result.detail << "\n"
        << std::flush;
    ctx.file(std::string(index) + "-criterion.json", "accept-" + std::string(index), kSeed,
             ordered_json{{"criterion", result.id},
                          {"title", result.title},
                          {"pass", result.pass},
                          {"detail", result.detail},
                          {"seconds", result.seconds}}
                     .dump(2) +
                 "\n");
    report.all_pass = report.all_pass && result.pass;
    report.criteria.push_back(std::move(result));
    ++id;
  }

  ordered_json summary;
  std::size_t passed = 0;
  for (const auto& c : report.criteria) passed += c.pass ? 1 : 0;
  summary["passed"] = passed;
  summary["total"] = report.criteria.size();
  ctx.file("accept.json", "accept", kSeed,
           ordered_json{{"id", "accept"},
                        {"seed", kSeed},
                        {"flagged", !report.all_pass},
                        {"summary", summary}}
                   .dump(2) +
               "\n");
  report.manifest = write_manifest(out_dir, std::move(entries));
  log << (report.all_pass ? "all criteria passed" : "criteria failed") << " (" << passed << "/"
      << report.criteria.size() << ")\n";
  return report;
}

}  // namespace erm
