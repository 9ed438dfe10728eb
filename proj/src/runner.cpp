#include "erm/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "erm/common.hpp"
#include "erm/expfam.hpp"
#include "erm/family.hpp"
#include "erm/gaussian_direct.hpp"
#include "erm/io.hpp"
#include "erm/margin.hpp"
#include "erm/risk_curve.hpp"
#include "erm/scenarios.hpp"

namespace erm {
namespace {

using ordered_json = nlohmann::ordered_json;

int line_of_offset(const std::string& text, std::size_t byte) {
  std::size_t end = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + end, '\n'));
}

// Field accessor that names the config location in every error message.
class Fields {
 public:
  Fields(const ordered_json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ArgumentError(where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const ordered_json& raw(const std::string& key) const {
    if (!j_.contains(key)) throw ArgumentError(where_ + ": missing field '" + key + "'");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) const {
    try {
      return raw(key).get<T>();
    } catch (const nlohmann::json::exception& ex) {
      throw ArgumentError(where_ + ": field '" + key + "': " + ex.what());
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) const {
    if (!j_.contains(key)) return fallback;
    return get<T>(key);
  }

  const std::string& where() const { return where_; }

 private:
  const ordered_json& j_;
  std::string where_;
};

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

ordered_json json_vector(const Vector& v) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

SGrid parse_grid(const Fields& f, const SGrid& fallback) {
  if (!f.has("grid")) return fallback;
  Fields g(f.raw("grid"), f.where() + ".grid");
  std::string rule = g.get_or<std::string>("rule", "geometric");
  if (rule == "geometric") {
    return SGrid::geometric(g.get<double>("start"), g.get<double>("end"),
                            g.get_or<double>("ratio", 1.05));
  }
  if (rule == "uniform") {
    return SGrid::uniform(g.get<double>("start"), g.get<double>("end"), g.get<double>("step"));
  }
  if (rule == "explicit") return SGrid::explicit_points(g.get<std::vector<double>>("points"));
  throw ArgumentError(g.where() + ": unknown grid rule '" + rule + "'");
}

Seminorm parse_seminorm(const Fields& f, int dim) {
  double scale = f.get_or<double>("scale", 1.0);
  if (!f.has("weights")) return Seminorm::scaled_l2(scale);
  const auto& w = f.raw("weights");
  if (w.is_string()) {
    const std::string name = w.get<std::string>();
    double p = 0.0;
    if (name == "index-squared") {
      p = 2.0;
    } else if (name == "index") {
      p = 1.0;
    } else {
      throw ArgumentError(f.where() + ": unknown weights rule '" + name + "'");
    }
    Vector weights(dim);
    for (int j = 0; j < dim; ++j) weights[j] = std::pow(j + 1.0, p);
    return Seminorm::weighted(std::move(weights), scale);
  }
  return Seminorm::weighted(to_vector(f.get<std::vector<double>>("weights")), scale);
}

// dim is the ambient dimension: it normalizes the ridge seminorm and sizes
// index-rule weights and box sets.
Penalty parse_penalty(const Fields& parent, int dim) {
  if (!parent.has("penalty")) return Penalty::zero();
  Fields f(parent.raw("penalty"), parent.where() + ".penalty");
  const std::string kind = f.get<std::string>("kind");
  if (kind == "zero") return Penalty::zero();
  if (kind == "ridge") {
    // lambda^2 ||g||_n^2, the empirical-norm ridge of the sequence model.
    return Penalty::squared(f.get<double>("lambda"),
                            Seminorm::scaled_l2(1.0 / std::sqrt(static_cast<double>(dim))));
  }
  if (kind == "squared") return Penalty::squared(f.get<double>("lambda"), parse_seminorm(f, dim));
  if (kind == "power") {
    return Penalty::power(f.get<double>("lambda"), f.get<double>("q"), parse_seminorm(f, dim));
  }
  if (kind == "box") {
    const double lo = f.get_or<double>("lo", -1.0);
    const double hi = f.get_or<double>("hi", 1.0);
    return Penalty::indicator(
        ConvexSet::box(Vector::Constant(dim, lo), Vector::Constant(dim, hi)));
  }
  throw ArgumentError(f.where() + ": unknown penalty kind '" + kind + "'");
}

ConvexSet parse_domain(const Fields& parent, int dim, const ConvexSet& fallback) {
  if (!parent.has("domain")) return fallback;
  const auto& d = parent.raw("domain");
  if (d.is_string()) {
    const std::string name = d.get<std::string>();
    if (name == "all") return ConvexSet::all(dim);
    throw ArgumentError(parent.where() + ".domain: unknown domain '" + name + "'");
  }
  Fields f(d, parent.where() + ".domain");
  const std::string kind = f.get<std::string>("kind");
  if (kind == "all") return ConvexSet::all(dim);
  if (kind == "ball") {
    Vector center = f.has("center") ? to_vector(f.get<std::vector<double>>("center"))
                                    : Vector::Zero(dim);
    return ConvexSet::ball(std::move(center), f.get<double>("radius"));
  }
  if (kind == "box") {
    const double lo = f.get<double>("lo");
    const double hi = f.get<double>("hi");
    return ConvexSet::box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
  }
  throw ArgumentError(f.where() + ": unknown domain kind '" + kind + "'");
}

struct Emitter {
  std::filesystem::path dir;
  std::string prefix;
  std::string scenario;
  std::uint64_t seed = 0;
  bool want_csv = true;
  bool want_json = true;
  std::vector<ManifestEntry>* entries = nullptr;

  void file(const std::string& name, const std::string& text) const {
    write_text_file(dir / name, text);
    entries->push_back({name, scenario, seed, sha256_hex(text)});
  }
  void csv(const std::string& suffix, const CsvTable& table) const {
    if (want_csv) file(prefix + suffix + ".csv", to_csv(table));
  }
  void json_doc(const std::string& suffix, const ordered_json& doc) const {
    if (want_json) file(prefix + suffix + ".json", doc.dump(2) + "\n");
  }
};

struct Outcome {
  bool flagged = false;
  ordered_json summary;
};

std::string flag_cell(bool b) { return b ? "1" : "0"; }

CsvTable curve_table(const RiskCurve& curve) {
  CsvTable t;
  t.header = {"s", "value", "se", "flag"};
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    t.rows.push_back({format_number(curve.grid.points[i]), format_number(curve.values[i]),
                      format_number(curve.ses[i]), flag_cell(curve.flags[i] != 0)});
  }
  return t;
}

const char* grid_rule_name(SGrid::Rule rule) {
  switch (rule) {
    case SGrid::Rule::Geometric: return "geometric";
    case SGrid::Rule::Uniform: return "uniform";
    default: return "explicit";
  }
}

ordered_json curve_sidecar(const RiskCurve& curve) {
  return ordered_json{{"seed", curve.seed},
                      {"replicates", curve.replicates},
                      {"grid",
                       {{"rule", grid_rule_name(curve.grid.rule)},
                        {"start", curve.grid.points.front()},
                        {"end", curve.grid.points.back()},
                        {"parameter", curve.grid.parameter},
                        {"size", curve.grid.size()}}}};
}

Dataset gaussian_vector_dataset(int dim, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Observation> obs(static_cast<std::size_t>(n));
  for (auto& o : obs) {
    o.x = Vector::NullaryExpr(dim, [&](Eigen::Index) { return normal(rng); });
  }
  return Dataset(SampleKind::Vector, std::move(obs));
}

Outcome run_normal_sequence(const Fields& f, const Emitter& em, int workers) {
  NormalSequenceSpec spec;
  spec.n = f.get<int>("n");
  if (spec.n <= 0) throw ArgumentError(f.where() + ": n must be positive");
  spec.sigma = f.get_or<double>("sigma", 1.0);
  spec.replicates = f.get<std::size_t>("replicates");
  spec.seed = em.seed;
  spec.penalty = parse_penalty(f, spec.n);
  if (f.has("g0") && f.raw("g0").is_array()) {
    spec.g0 = to_vector(f.get<std::vector<double>>("g0"));
  } else {
    const std::string name = f.get_or<std::string>("g0", "zeros");
    if (name == "zeros") {
      spec.g0 = Vector::Zero(spec.n);
    } else if (name == "sine") {
      const double amp = f.get_or<double>("g0_amplitude", 0.5);
      spec.g0 = Vector::NullaryExpr(spec.n, [&](Eigen::Index i) {
        return amp * std::sin(2.0 * M_PI * static_cast<double>(i + 1) / spec.n);
      });
    } else {
      throw ArgumentError(f.where() + ": unknown g0 rule '" + name + "'");
    }
  }
  const std::string ref = f.get_or<std::string>("reference", "true-signal");
  if (ref == "true-signal") {
    spec.reference = NormalSequenceSpec::Reference::TrueSignal;
  } else if (ref == "noiseless-minimizer") {
    spec.reference = NormalSequenceSpec::Reference::NoiselessMinimizer;
  } else {
    throw ArgumentError(f.where() + ": unknown reference '" + ref + "'");
  }
  const auto t_grid =
      f.get_or<std::vector<double>>("t_grid", {0.25, 0.5, 1.0, 2.0, 3.0, 4.0});

  const ConcentrationReport rep = tail_report(spec, t_grid, workers);

  CsvTable table;
  table.header = {"t", "bound", "freq", "se", "flagged"};
  ordered_json rows = ordered_json::array();
  ordered_json flagged_t = ordered_json::array();
  for (const TailRow& row : rep.rows) {
    table.rows.push_back({format_number(row.t), format_number(row.bound),
                          format_number(row.frequency), format_number(row.se),
                          flag_cell(row.flagged)});
    rows.push_back({{"t", row.t},
                    {"threshold", row.threshold},
                    {"bound", row.bound},
                    {"frequency", row.frequency},
                    {"se", row.se},
                    {"center_slack", row.center_slack},
                    {"flagged", row.flagged}});
    if (row.flagged) flagged_t.push_back(row.t);
  }
  em.csv("", table);

  Outcome out;
  out.flagged = rep.any_flagged;
  out.summary["m0_hat"] = rep.m0_hat;
  out.summary["m0_se"] = rep.m0_se;
  out.summary["flagged_t"] = flagged_t;

  ordered_json doc{{"n", spec.n},
                   {"sigma", spec.sigma},
                   {"replicates", spec.replicates},
                   {"quarantined", rep.quarantined},
                   {"low_replicates", rep.low_replicates},
                   {"m0_hat", rep.m0_hat},
                   {"m0_se", rep.m0_se},
                   {"rows", rows}};
  const auto pairs = f.get_or<std::size_t>("lipschitz_pairs", 0);
  if (pairs > 0) {
    const LipschitzReport lip = lipschitz_check(spec, pairs, workers);
    doc["lipschitz"] = {{"max_ratio", lip.max_ratio},
                        {"min_ratio", lip.min_ratio},
                        {"pairs", lip.pairs},
                        {"quarantined", lip.quarantined}};
    out.summary["lipschitz_max_ratio"] = lip.max_ratio;
  }
  em.json_doc("-detail", doc);
  return out;
}

Outcome run_gaussian_curve(const Fields& f, const Emitter& em, int workers) {
  const int dim = f.get<int>("dim");
  if (dim <= 0) throw ArgumentError(f.where() + ": dim must be positive");
  const int n = f.get<int>("n");
  if (n <= 0) throw ArgumentError(f.where() + ": n must be positive");
  const auto replicates = f.get_or<std::size_t>("replicates", 200);
  const Penalty penalty = parse_penalty(f, dim);
  const ConvexSet domain = parse_domain(f, dim, ConvexSet::all(dim));
  const SGrid grid = parse_grid(f, SGrid::geometric(0.05, 2.0, 1.05));

  GaussianMeanFamily family(Vector::Zero(dim), domain);
  if (!domain.contains(Vector::Zero(dim))) {
    throw ArgumentError(f.where() + ": domain must contain the population minimizer (origin)");
  }
  family.register_g0(Vector::Zero(dim));

  Outcome out;
  if (replicates <= 1) {
    const Dataset data = gaussian_vector_dataset(dim, n, derive_seed(em.seed, 0, 0));
    const RiskCurve curve = empirical_curve(family, penalty, data, nullptr, grid);
    em.csv("", curve_table(curve));
    em.json_doc("-meta", curve_sidecar(curve));
    const MinimumLemmaReport lemma = verify_minimum_lemma(family, penalty, data, nullptr, grid);
    out.flagged = curve.any_flagged();
    out.summary["s_hat"] = lemma.s_hat;
    out.summary["tau_hat"] = lemma.tau_hat;
    out.summary["lemma_gap"] = lemma.gap;
  } else {
    MeanCurveSpec spec;
    spec.replicates = replicates;
    spec.seed = em.seed;
    spec.workers = workers;
    spec.sampler = [dim, n](std::mt19937_64& rng) {
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<Observation> obs(static_cast<std::size_t>(n));
      for (auto& o : obs) {
        o.x = Vector::NullaryExpr(dim, [&](Eigen::Index) { return normal(rng); });
      }
      return Dataset(SampleKind::Vector, std::move(obs));
    };
    const RiskCurve curve = mean_E_curve(family, penalty, spec, nullptr, grid);
    em.csv("", curve_table(curve));
    em.json_doc("-meta", curve_sidecar(curve));
    const ArgminReport am = argmin_curve(curve);
    out.flagged = curve.any_flagged();
    out.summary["s0"] = am.s;
    out.summary["objective_min"] = am.value;
  }

  if (f.has("concavity_c")) {
    const double c = f.get<double>("concavity_c");
    const Dataset data = gaussian_vector_dataset(dim, n, derive_seed(em.seed, 9, 0));
    const RiskCurve vs = varsigma_curve(family, penalty, data, nullptr, c, grid);
    em.csv("-varsigma", curve_table(vs));
    const ConcavityReport conc = concavity_check(vs);
    out.flagged = out.flagged || vs.any_flagged();
    out.summary["concavity_pass"] = conc.pass;
    out.summary["concavity_worst_violation"] = conc.worst_violation;
  }
  return out;
}

Outcome run_projection(const Fields& f, const Emitter& em, int workers, int case_id) {
  ProjectionConfig pc;
  pc.case_id = case_id;
  pc.alpha = f.get_or<double>("alpha", 1.0);
  pc.q = f.get_or<double>("q", 1.5);
  pc.lambda_scale = f.get_or<double>("lambda_scale", 1.0);
  const double default_exponent = case_id == 2 ? -1.0 / 3.0 : (case_id == 3 ? -0.3 : 0.0);
  pc.lambda_exponent = f.get_or<double>("lambda_exponent", default_exponent);
  pc.n_list = f.get<std::vector<int>>("n_list");
  pc.replicates = f.get_or<std::size_t>("replicates", 100);
  pc.erm_replicates = f.get_or<std::size_t>("erm_replicates", 0);
  pc.basis_dim = f.get_or<int>("basis_dim", 0);
  pc.seed = em.seed;
  pc.workers = workers;
  pc.grid = parse_grid(f, SGrid{});
  if (f.has("theta0")) pc.theta0 = to_vector(f.get<std::vector<double>>("theta0"));

  const ProjectionResult res = run_projection_case(pc);

  CsvTable table;
  table.header = {"n",  "lambda", "tau_min", "s0", "s0_se", "majorant_constant",
                  "boundary_fraction", "erm_max_gap", "erm_median_deviation"};
  bool flagged = false;
  ordered_json per_n = ordered_json::array();
  for (const ProjectionPoint& pt : res.per_n) {
    double max_gap = 0.0;
    for (double g : pt.lemma_gap) max_gap = std::max(max_gap, g);
    double median_dev = std::numeric_limits<double>::quiet_NaN();
    if (!pt.deviation.empty()) {
      std::vector<double> devs = pt.deviation;
      std::nth_element(devs.begin(), devs.begin() + devs.size() / 2, devs.end());
      median_dev = devs[devs.size() / 2];
    }
    table.rows.push_back({format_number(pt.n), format_number(pt.lambda),
                          format_number(pt.tau_min), format_number(pt.s0),
                          format_number(pt.s0_se), format_number(pt.majorant_constant),
                          format_number(pt.boundary_fraction), format_number(max_gap),
                          format_number(median_dev)});
    em.csv("-n" + std::to_string(pt.n), curve_table(pt.mean_curve));
    flagged = flagged || pt.mean_curve.any_flagged();
    // The empirical minimizer must land on the curve argmin up to the grid
    // resolution; a larger gap means the two routes disagree.
    if (max_gap > pt.mean_curve.grid.max_step() + 1e-6) flagged = true;
    per_n.push_back({{"n", pt.n},
                     {"lambda", pt.lambda},
                     {"tau_min", pt.tau_min},
                     {"s0", pt.s0},
                     {"s0_se", pt.s0_se},
                     {"majorant_constant", pt.majorant_constant},
                     {"boundary_fraction", pt.boundary_fraction},
                     {"erm_max_gap", max_gap},
                     {"erm_median_deviation", median_dev}});
  }
  em.csv("", table);
  em.json_doc("-detail", ordered_json{{"per_n", per_n}});

  Outcome out;
  out.flagged = flagged;
  if (res.rate.n_values.size() >= 4) {
    out.summary["slope"] = res.rate.slope;
    out.summary["slope_low"] = res.rate.slope_low;
    out.summary["slope_high"] = res.rate.slope_high;
  }
  out.summary["target_slope"] = res.rate.target;
  ordered_json s0s = ordered_json::array();
  for (const ProjectionPoint& pt : res.per_n) s0s.push_back(pt.s0);
  out.summary["s0"] = s0s;
  if (pc.erm_replicates > 0 && !res.per_n.empty()) {
    out.summary["boundary_fraction_last"] = res.per_n.back().boundary_fraction;
  }
  return out;
}

Outcome run_linearized(const Fields& f, const Emitter& em, int workers) {
  LinearizedConfig lc;
  lc.dimension = f.get_or<int>("dimension", 5);
  lc.lambda = f.get_or<double>("lambda", 0.0);
  lc.noise_sd = f.get_or<double>("noise_sd", 1.0);
  lc.l1_domain = f.get_or<bool>("l1_domain", true);
  lc.n_list = f.get<std::vector<int>>("n_list");
  lc.envelope_draws = f.get_or<std::size_t>("envelope_draws", 1000000);
  lc.seed = em.seed;
  lc.workers = workers;
  if (f.has("beta0")) lc.beta0 = to_vector(f.get<std::vector<double>>("beta0"));
  if (f.has("sigma0")) {
    const auto rows = f.get<std::vector<std::vector<double>>>("sigma0");
    Matrix m(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) {
        throw ArgumentError(f.where() + ": sigma0 must be square");
      }
      for (std::size_t j = 0; j < rows.size(); ++j) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
    }
    lc.sigma0 = std::move(m);
  }

  const LinearizedResult res = run_linearized_ls(lc);

  CsvTable table;
  table.header = {"n", "tau_sq", "beta_error", "closed_form_gap", "holder_margin"};
  ordered_json per_n = ordered_json::array();
  bool holder_bad = false;
  for (const LinearizedPoint& pt : res.per_n) {
    table.rows.push_back({format_number(pt.n), format_number(pt.tau_sq),
                          format_number(pt.beta_error), format_number(pt.closed_form_gap),
                          format_number(pt.holder_margin)});
    per_n.push_back({{"n", pt.n},
                     {"tau_sq", pt.tau_sq},
                     {"beta_error", pt.beta_error},
                     {"holder_margin", pt.holder_margin},
                     {"beta_hat", json_vector(pt.beta_hat)}});
    if (pt.holder_margin < -1e-9) holder_bad = true;
  }
  em.csv("", table);

  ordered_json doc{{"per_n", per_n}};
  Outcome out;
  out.summary["tau_sq_last"] = res.per_n.empty() ? 0.0 : res.per_n.back().tau_sq;
  out.summary["beta_error_last"] = res.per_n.empty() ? 0.0 : res.per_n.back().beta_error;
  if (lc.l1_domain) {
    doc["envelope"] = {{"c_f", res.envelope.c_f},       {"C_f", res.envelope.big_c_f},
                       {"k0", res.envelope.k0},         {"k_x", res.envelope.k_x},
                       {"worst_ratio", res.envelope.worst_ratio},
                       {"holds", res.envelope.holds}};
    out.summary["envelope_holds"] = res.envelope.holds;
    out.summary["envelope_worst_ratio"] = res.envelope.worst_ratio;
    out.flagged = !res.envelope.holds;
  }
  out.flagged = out.flagged || holder_bad;
  em.json_doc("-detail", doc);
  return out;
}

MarginFunction parse_margin(const Fields& parent) {
  if (!parent.has("margin")) return MarginFunction::quadratic(1.0);
  Fields f(parent.raw("margin"), parent.where() + ".margin");
  const std::string kind = f.get<std::string>("kind");
  if (kind == "quadratic") return MarginFunction::quadratic(f.get_or<double>("c", 1.0));
  if (kind == "tabulated") {
    return MarginFunction::tabulated(f.get<std::vector<double>>("us"),
                                     f.get<std::vector<double>>("gs"));
  }
  throw ArgumentError(f.where() + ": unknown margin kind '" + kind + "'");
}

Outcome run_margin_table(const Fields& f, const Emitter& em, int) {
  const double n = f.get<double>("n");
  const double tau_max = f.get<double>("tau_max");
  const double s0 = f.get<double>("s0");
  const double r0 = f.get<double>("r0");
  const double C = f.get_or<double>("C", 1.0);
  const double K = f.get_or<double>("K", 1.0);
  std::optional<double> c0;
  if (f.has("c0")) c0 = f.get<double>("c0");
  const MarginFunction G = parse_margin(f);
  const auto t_grid = f.get_or<std::vector<double>>("t_grid", {0.5, 1.0, 2.0, 3.0});

  const bool have_process = f.has("sigma_s_sq") && f.has("E_s");
  const double sigma_s_sq = f.get_or<double>("sigma_s_sq", 0.0);
  const double E_s = f.get_or<double>("E_s", 0.0);
  const double s = f.get_or<double>("s", s0);
  const bool curvature = f.get_or<bool>("curvature", false);

  CsvTable table;
  table.header = {"t", "delta"};
  if (have_process) {
    table.header.push_back("kr_lower");
    table.header.push_back("kr_upper");
    if (curvature) {
      table.header.push_back("curv_lower");
      table.header.push_back("curv_upper");
    }
  }
  double delta_min = std::numeric_limits<double>::infinity();
  double delta_max = 0.0;
  for (double t : t_grid) {
    const double delta = delta_bound(t, n, tau_max, s0, r0, G, C, K, c0);
    delta_min = std::min(delta_min, delta);
    delta_max = std::max(delta_max, delta);
    std::vector<std::string> row{format_number(t), format_number(delta)};
    if (have_process) {
      const BoundInterval kr = klein_rio_interval(K, sigma_s_sq, E_s, t, n);
      row.push_back(format_number(kr.lower));
      row.push_back(format_number(kr.upper));
      if (curvature) {
        const BoundInterval cv = curvature_interval(C, s, r0, K, E_s, t, n);
        row.push_back(format_number(cv.lower));
        row.push_back(format_number(cv.upper));
      }
    }
    table.rows.push_back(std::move(row));
  }
  em.csv("", table);

  Outcome out;
  out.summary["delta_min"] = delta_min;
  out.summary["delta_max"] = delta_max;
  return out;
}

std::function<double(double)> parse_stat(const Fields& f) {
  const std::string kind = f.get<std::string>("kind");
  if (kind == "identity") return [](double x) { return x; };
  if (kind == "power") {
    const double p = f.get<double>("p");
    return [p](double x) { return std::pow(x, p); };
  }
  if (kind == "cosine") {
    const double k = f.get<double>("k");
    return [k](double x) { return std::sqrt(2.0) * std::cos(M_PI * k * x); };
  }
  throw ArgumentError(f.where() + ": unknown statistic kind '" + kind + "'");
}

BaseMeasure parse_base(const Fields& parent) {
  Fields f(parent.raw("base"), parent.where() + ".base");
  const std::string kind = f.get<std::string>("kind");
  if (kind == "two-point" || kind == "discrete") {
    return BaseMeasure::discrete(f.get<std::vector<double>>("points"),
                                 f.get<std::vector<double>>("weights"));
  }
  if (kind == "interval") {
    const double lo = f.get<double>("lo");
    const double hi = f.get<double>("hi");
    const std::string density = f.get_or<std::string>("density", "uniform");
    if (density == "uniform") return BaseMeasure::interval(lo, hi, [](double) { return 1.0; });
    if (density == "exp") {
      return BaseMeasure::interval(lo, hi, [](double x) { return std::exp(-x); });
    }
    throw ArgumentError(f.where() + ": unknown density '" + density + "'");
  }
  throw ArgumentError(f.where() + ": unknown base kind '" + kind + "'");
}

Outcome run_expfam_density(const Fields& f, const Emitter& em, int) {
  BaseMeasure base = parse_base(f);
  std::vector<std::function<double(double)>> stats;
  if (f.has("stats")) {
    const auto& arr = f.raw("stats");
    if (!arr.is_array() || arr.empty()) {
      throw ArgumentError(f.where() + ": stats must be a non-empty array");
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      stats.push_back(parse_stat(Fields(arr[i], f.where() + ".stats[" + std::to_string(i) + "]")));
    }
  } else {
    stats.push_back([](double x) { return x; });
  }
  const int dim = static_cast<int>(stats.size());
  const ConvexSet domain =
      parse_domain(f, dim, ConvexSet::ball(Vector::Zero(dim), 10.0));
  const bool discrete = base.kind() == BaseMeasure::Kind::Discrete;
  ExpFamily family(std::move(base), std::move(stats), domain);

  const Vector theta = f.has("theta") ? to_vector(f.get<std::vector<double>>("theta"))
                                      : Vector::Ones(dim);
  const auto t_grid = f.get_or<std::vector<double>>(
      "t_grid", {1e-1, 3.162e-2, 1e-2, 3.162e-3, 1e-3, 3.162e-4, 1e-4});
  const TaylorReport taylor = taylor_ratio(family, theta, t_grid);

  CsvTable table;
  table.header = {"t", "ratio", "deviation_rate"};
  for (const TaylorRow& row : taylor.rows) {
    table.rows.push_back(
        {format_number(row.t), format_number(row.ratio), format_number(row.deviation_rate)});
  }
  em.csv("", table);

  Outcome out;
  out.summary["kappa_small"] = taylor.kappa_small;
  out.summary["kappa_next"] = taylor.kappa_next;
  out.summary["kappa_stable"] = taylor.kappa_stable;

  if (f.has("fit")) {
    if (!discrete) {
      throw ArgumentError(f.where() + ": fit requires a discrete base measure");
    }
    Fields fit(f.raw("fit"), f.where() + ".fit");
    const int n = fit.get<int>("n");
    if (n <= 0) throw ArgumentError(fit.where() + ": n must be positive");
    const Vector theta_star = to_vector(fit.get<std::vector<double>>("theta_star"));
    if (theta_star.size() != dim) {
      throw ArgumentError(fit.where() + ": theta_star dimension mismatch");
    }
    // Tilted masses w_i exp(theta* . psi(x_i)), sampled by inverse CDF so the
    // draw sequence is identical on every platform.
    const auto& points = family.base().points();
    const auto& weights = family.base().weights();
    std::vector<double> cumulative(points.size());
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double logit = 0.0;
      for (int j = 0; j < dim; ++j) logit += theta_star[j] * family.statistic(j, points[i]);
      total += weights[i] * std::exp(logit);
      cumulative[i] = total;
    }
    std::mt19937_64 rng(derive_seed(em.seed, 7, 0));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (auto& x : xs) {
      const double u = uniform(rng) * total;
      const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
      x = points[std::min<std::size_t>(it - cumulative.begin(), points.size() - 1)];
    }
    const Penalty penalty = parse_penalty(fit, dim);
    const SolveResult fit_result = fit_density_mle(family, Dataset::scalars(xs), penalty);
    out.flagged = !fit_result.converged;
    out.summary["fit_converged"] = fit_result.converged;
    out.summary["theta_hat"] = json_vector(fit_result.minimizer);
    out.summary["theta_error"] = (fit_result.minimizer - theta_star).norm();
  }
  return out;
}

Outcome run_expfam_regression(const Fields& f, const Emitter& em, int) {
  const int n = f.get<int>("n");
  if (n <= 0) throw ArgumentError(f.where() + ": n must be positive");

  ScalarLink link = ScalarLink::gaussian();
  bool exponential = false;
  double lo = 0.0, hi = 0.0;
  const auto& lk = f.raw("link");
  if (lk.is_string()) {
    const std::string name = lk.get<std::string>();
    if (name != "gaussian") throw ArgumentError(f.where() + ": unknown link '" + name + "'");
  } else {
    Fields g(lk, f.where() + ".link");
    const std::string name = g.get<std::string>("kind");
    if (name == "gaussian") {
    } else if (name == "exponential") {
      lo = g.get<double>("lo");
      hi = g.get<double>("hi");
      link = ScalarLink::exponential(lo, hi);
      exponential = true;
    } else {
      throw ArgumentError(g.where() + ": unknown link kind '" + name + "'");
    }
  }

  Vector xi(n);
  if (f.has("xi_true") && f.raw("xi_true").is_array()) {
    xi = to_vector(f.get<std::vector<double>>("xi_true"));
    if (xi.size() != n) throw ArgumentError(f.where() + ": xi_true length mismatch");
  } else {
    Fields r(f.raw("xi_true"), f.where() + ".xi_true");
    const double a = r.get<double>("lo");
    const double b = r.get<double>("hi");
    for (int i = 0; i < n; ++i) xi[i] = a + (b - a) * i / std::max(1, n - 1);
  }

  std::mt19937_64 rng(derive_seed(em.seed, 3, 0));
  Vector y(n);
  if (!exponential) {
    const double sd = f.get_or<double>("noise_sd", 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < n; ++i) y[i] = xi[i] + sd * normal(rng);
  } else {
    // Counts with mean exp(xi_i); the means stay small enough on the stated
    // link domain for product sampling.
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      const double limit = std::exp(-std::exp(xi[i]));
      int k = 0;
      double p = uniform(rng);
      while (p > limit) {
        ++k;
        p *= uniform(rng);
      }
      y[i] = k;
    }
  }

  const Penalty penalty = parse_penalty(f, n);
  const ConvexSet domain = parse_domain(
      f, n,
      exponential ? ConvexSet::box(Vector::Constant(n, lo), Vector::Constant(n, hi))
                  : ConvexSet::all(n));
  const RegressionResult res = fit_expfam_regression(y, link, domain, penalty);

  CsvTable table;
  table.header = {"i", "xi_true", "y", "xi_hat"};
  for (int i = 0; i < n; ++i) {
    table.rows.push_back({format_number(i), format_number(xi[i]), format_number(y[i]),
                          format_number(res.solve.minimizer[i])});
  }
  em.csv("", table);

  Outcome out;
  out.flagged = !res.solve.converged;
  out.summary["converged"] = res.solve.converged;
  out.summary["clipped"] = res.clipped;
  out.summary["objective"] = res.solve.objective;
  out.summary["rmse"] = std::sqrt((res.solve.minimizer - xi).squaredNorm() / n);
  return out;
}

Outcome dispatch(const std::string& id, const Fields& f, const Emitter& em, int workers) {
  if (id == "normal-sequence") return run_normal_sequence(f, em, workers);
  if (id == "gaussian-curve") return run_gaussian_curve(f, em, workers);
  if (id == "projection-case1") return run_projection(f, em, workers, 1);
  if (id == "projection-case2") return run_projection(f, em, workers, 2);
  if (id == "projection-case3") return run_projection(f, em, workers, 3);
  if (id == "linearized-ls") return run_linearized(f, em, workers);
  if (id == "margin-table") return run_margin_table(f, em, workers);
  if (id == "expfam-density") return run_expfam_density(f, em, workers);
  if (id == "expfam-regression") return run_expfam_regression(f, em, workers);
  throw ArgumentError(f.where() + ": unknown scenario id '" + id + "'");
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& source_name) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ArgumentError(source_name + ":" + std::to_string(line_of_offset(text, ex.byte)) +
                        ": " + ex.what());
  }
  Fields f(doc, source_name);
  RunConfig config;
  if (!f.has("seed")) {
    throw ArgumentError(source_name +
                        ": missing field 'seed' (an explicit seed keeps runs reproducible)");
  }
  config.seed = f.get<std::uint64_t>("seed");
  config.workers = f.get_or<int>("workers", 1);
  if (config.workers < 1) throw ArgumentError(source_name + ": workers must be >= 1");
  config.out_dir = f.get_or<std::string>("out", "");
  config.formats = f.get_or<std::vector<std::string>>("formats", {"csv", "json"});
  if (config.formats.empty()) throw ArgumentError(source_name + ": formats must be non-empty");
  for (const auto& fmt : config.formats) {
    if (fmt != "csv" && fmt != "json") {
      throw ArgumentError(source_name + ": unknown format '" + fmt + "'");
    }
  }
  if (f.has("scenarios")) {
    const auto& arr = f.raw("scenarios");
    if (!arr.is_array()) throw ArgumentError(source_name + ": 'scenarios' must be an array");
    for (const auto& item : arr) config.scenarios.push_back(item);
  }
  return config;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  return parse_run_config_text(read_text_file(path), path.filename().string());
}

int run(const RunConfig& config, std::ostream& log) {
  namespace fs = std::filesystem;
  if (config.out_dir.empty()) throw ArgumentError("run: output directory not set");
  fs::create_directories(config.out_dir);
  for (const auto& entry : fs::directory_iterator(config.out_dir)) {
    (void)entry;
    throw ArgumentError("run: output directory not empty: " + config.out_dir.string() +
                        " (outputs would orphan existing files)");
  }
  const bool want_csv =
      std::find(config.formats.begin(), config.formats.end(), "csv") != config.formats.end();
  const bool want_json =
      std::find(config.formats.begin(), config.formats.end(), "json") != config.formats.end();

  std::vector<ManifestEntry> entries;
  bool any_flag = false;
  for (std::size_t i = 0; i < config.scenarios.size(); ++i) {
    Fields f(config.scenarios[i], "scenario " + std::to_string(i + 1));
    const std::string id = f.get<std::string>("id");
    char index[8];
    std::snprintf(index, sizeof(index), "%02zu", i + 1);
    Emitter em;
    em.dir = config.out_dir;
    em.prefix = std::string(index) + "-" + id;
    em.scenario = id;
    em.seed = f.get_or<std::uint64_t>("seed", derive_seed(config.seed, 0x5ce0, i));
    em.want_csv = want_csv;
    em.want_json = want_json;
    em.entries = &entries;

    log << "[" << em.prefix << "] running\n" << std::flush;
    const Outcome out = dispatch(id, f, em, config.workers);
    ordered_json doc{
        {"id", id}, {"seed", em.seed}, {"flagged", out.flagged}, {"summary", out.summary}};
    em.file(em.prefix + ".json", doc.dump(2) + "\n");
    if (out.flagged) log << "[" << em.prefix << "] FLAG\n" << std::flush;
    any_flag = any_flag || out.flagged;
  }
  const auto manifest = write_manifest(config.out_dir, entries);
  log << "manifest: " << manifest.string() << " (" << entries.size() << " files, "
      << config.scenarios.size() << " scenarios)\n";
  return any_flag ? 2 : 0;
}

std::string report(const std::filesystem::path& manifest_path) {
  namespace fs = std::filesystem;
  const auto entries = read_manifest(manifest_path);
  std::ostringstream out;
  if (entries.empty()) {
    out << "no runs\n";
    return out.str();
  }
  const fs::path dir = manifest_path.parent_path();
  for (const auto& e : entries) {
    if (!fs::exists(dir / e.file)) {
      throw ArgumentError("report: missing referenced file: " + (dir / e.file).string());
    }
  }

  // One line per scenario instance, keyed by its summary artifact; criterion
  // artifacts from the acceptance suite are listed individually.
  struct Criterion {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
  };
  std::vector<Criterion> criteria;
  std::size_t scenario_count = 0;
  std::size_t flag_count = 0;

  out << "run report: " << manifest_path.string() << "\n";
  for (const auto& e : entries) {
    if (e.file.size() < 5 || e.file.substr(e.file.size() - 5) != ".json") continue;
    ordered_json doc;
    try {
      doc = ordered_json::parse(read_text_file(dir / e.file));
    } catch (const nlohmann::json::exception&) {
      continue;
    }
    if (doc.is_object() && doc.contains("criterion")) {
      Criterion c;
      c.id = doc.value("criterion", 0);
      c.title = doc.value("title", std::string());
      c.pass = doc.value("pass", false);
      c.detail = doc.value("detail", std::string());
      criteria.push_back(std::move(c));
      continue;
    }
    if (!doc.is_object() || !doc.contains("summary")) continue;
    ++scenario_count;
    const bool flagged = doc.value("flagged", false);
    if (flagged) ++flag_count;
    out << doc.value("id", e.scenario) << " (seed " << doc.value("seed", e.seed)
        << "): " << (flagged ? "FLAG" : "PASS") << "\n";
    for (const auto& [key, value] : doc.at("summary").items()) {
      out << "  " << key << ": ";
      if (value.is_number()) {
        out << format_number(value.get<double>());
      } else {
        out << value.dump();
      }
      out << "\n";
    }
  }
  if (!criteria.empty()) {
    std::sort(criteria.begin(), criteria.end(),
              [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
    out << "acceptance criteria:\n";
    for (const auto& c : criteria) {
      char index[8];
      std::snprintf(index, sizeof(index), "%02d", c.id);
      out << "  " << index << " " << c.title << ": " << (c.pass ? "PASS" : "FAIL");
      if (!c.detail.empty()) out << " (" << c.detail << ")";
      out << "\n";
    }
  }
  out << scenario_count << " scenario(s), " << flag_count << " flagged";
  if (!criteria.empty()) {
    std::size_t passed = 0;
    for (const auto& c : criteria) passed += c.pass ? 1 : 0;
    out << "; " << passed << "/" << criteria.size() << " criteria passed";
  }
  out << "\n";
  return out.str();
}

}  // namespace erm
