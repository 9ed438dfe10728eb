#include "erm/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace erm {

namespace {

// Nodes via Newton iteration on P_m with the three-term recurrence.
std::pair<std::vector<double>, std::vector<double>> reference_rule(int m) {
  std::vector<double> x(m), w(m);
  for (int i = 0; i < m; ++i) {
    // Chebyshev-based initial guess.
    double t = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = m * (t * p1 - p0) / (t * t - 1.0);
      double step = p1 / dp;
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= m; ++k) {
      double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = m * (t * p1 - p0) / (t * t - 1.0);
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  return {x, w};
}

std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
std::mutex cache_mutex;

}  // namespace

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int count, double a, double b) {
  if (count < 1) throw std::invalid_argument("gauss_legendre: count must be positive");
  std::pair<std::vector<double>, std::vector<double>> ref;
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(count);
    if (it == cache.end()) it = cache.emplace(count, reference_rule(count)).first;
    ref = it->second;
  }
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  std::vector<double> x(count), w(count);
  for (int i = 0; i < count; ++i) {
    x[i] = mid + half * ref.first[i];
    w[i] = half * ref.second[i];
  }
  return {x, w};
}

}  // namespace erm
