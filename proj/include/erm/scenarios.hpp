#pragma once

#include <cstdint>

#include "erm/risk_curve.hpp"

namespace erm {

// Ellipsoid thresholds u_1 >= u_2 >= ... for {c : sum_j c_j^2 / u_j <= 1},
// built so the counting function #{j : u_j > s^2} equals W(s) b s^(gamma-2)
// with W(s) = a + (b/gamma)(s^gamma - 1) on [s_floor, s_hi]. Then the width
// profile sum_j min(s^2, u_j) tracks W(s)^2, giving a mean curve whose argmin
// path over n keeps a near-constant log-log slope. Requires the counting
// function to be decreasing on the stated range.
std::vector<double> designed_thresholds(double a, double b, double gamma, double s_hi,
                                        double s_floor);

struct RateReport {
  std::vector<double> n_values;
  std::vector<double> estimates;
  std::vector<double> ses;
  double slope = 0.0;
  double slope_low = 0.0;   // slope -/+ 2 jackknife SE
  double slope_high = 0.0;
  double target = 0.0;
};

// Least-squares slope of log(estimate) on log(n) with a delete-one jackknife
// interval. Needs >= 4 points spanning >= 1.5 decades of n.
RateReport rate_fit(const std::vector<double>& n_values, const std::vector<double>& estimates,
                    const std::vector<double>& ses, double target);

// Projection density estimation on [0,1] with the cosine basis. Case 1 has no
// penalty and an ellipsoid domain; case 2 a squared seminorm penalty; case 3 a
// power-q penalty, both with weights j^(1/alpha) and lambda following
// lambda_scale * n^lambda_exponent.
struct ProjectionConfig {
  int case_id = 1;
  double alpha = 1.0;  // (0, 1]
  double q = 1.5;      // case 3 only, (1, 2]
  double lambda_scale = 1.0;
  double lambda_exponent = 0.0;
  std::vector<int> n_list;
  std::size_t replicates = 100;      // mean-curve datasets per n
  std::size_t erm_replicates = 0;    // extra datasets for tau(f_hat) vs s_hat / s0
  std::uint64_t seed = 1;
  int workers = 1;
  SGrid grid;      // empty points: per-case default, floor raised to tau_min
  Vector theta0;   // truth coefficients; empty means the uniform density
  int basis_dim = 0;  // 0: per-case default (case 1: generator length)
};

struct ProjectionPoint {
  int n = 0;
  double lambda = 0.0;
  double tau_min = 0.0;
  double s0 = 0.0;     // argmin of the mean curve
  double s0_se = 0.0;  // over replicate blocks
  // max over the grid of mean_curve(s) * m_n / shape(s); stability of this
  // constant across n is the empirical form of the entropy-level assumption.
  double majorant_constant = 0.0;
  RiskCurve mean_curve;
  std::vector<double> tau_hat;    // one entry per ERM dataset
  std::vector<double> s_hat;
  std::vector<double> lemma_gap;  // |tau_hat - s_hat|
  std::vector<double> deviation;  // |tau_hat - s0| / s0
  double boundary_fraction = 0.0;  // share of s_hat within one grid step of tau_min
};

struct ProjectionResult {
  ProjectionConfig config;          // with defaults resolved
  std::vector<double> thresholds;   // case-1 ellipsoid (empty otherwise)
  std::vector<ProjectionPoint> per_n;
  RateReport rate;
};

ProjectionResult run_projection_case(const ProjectionConfig& config);

// Linear regression with a known population second-moment matrix: minimize
// -(1/n) sum_i Y_i X_i' beta + beta' Sigma0 beta / 2 + lambda^2 |beta|^2 over
// either all of R^p or the l1 ball of radius 1 around beta0. The design is
// X_i = L U_i with U_i uniform on [-1,1]^p and L L' = 3 Sigma0, so
// E X X' = Sigma0 and |X_ij| <= ||row_j L||_1.
struct LinearizedConfig {
  int dimension = 5;
  double lambda = 0.0;
  Vector beta0;          // empty: all-ones / p, so its l1 norm is 1
  double noise_sd = 1.0;
  bool l1_domain = true;
  Matrix sigma0;         // empty: identity / 3
  std::vector<int> n_list;
  std::uint64_t seed = 1;
  std::size_t envelope_draws = 1000000;
  int workers = 1;
};

struct LinearizedPoint {
  int n = 0;
  Vector beta_hat;
  double tau_sq = 0.0;      // (1/2)(b-b0)' Sigma0 (b-b0) + lambda^2 |b|^2
  double beta_error = 0.0;  // ||beta_hat - beta0||
  // ||beta_hat - Sigma0^{-1} X'Y/n||; meaningful only when lambda = 0 and the
  // domain is unconstrained, NaN otherwise.
  double closed_form_gap = 0.0;
  // min over samples of ||X_i||_inf ||beta_hat - beta0||_1 - |X_i'(beta_hat - beta0)|;
  // nonnegative certifies the per-sample Holder bound.
  double holder_margin = 0.0;
};

// Envelope F = K_X |eps| + K_X K_0 + (K_X^2 + 2 K_0 K_X)/2 for the loss-class
// differences; the certificate is P F^2 1{F > t} <= c_f^2 exp(-t^2 / C_f^2).
// C_f = max(1, 2 K_X); c_f comes from the closed-form Gaussian tail with a 5%
// cushion. `holds` checks the bound against fresh simulated draws, allowing
// five empirical standard errors per t.
struct EnvelopeCertificate {
  double c_f = 0.0;
  double big_c_f = 0.0;
  double k0 = 0.0;
  double k_x = 0.0;
  double worst_ratio = 0.0;  // max over t of empirical / (bound + 5 SE)
  bool holds = false;
};

struct LinearizedResult {
  LinearizedConfig config;
  std::vector<LinearizedPoint> per_n;
  EnvelopeCertificate envelope;  // only certified for the l1 domain
};

LinearizedResult run_linearized_ls(const LinearizedConfig& config);

}  // namespace erm
