#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace erm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Configuration or input that violates a documented precondition.
class ArgumentError : public std::runtime_error {
 public:
  explicit ArgumentError(const std::string& what) : std::runtime_error(what) {}
};

// Parameter outside the declared domain of a family or set.
class DomainViolation : public std::runtime_error {
 public:
  explicit DomainViolation(const std::string& what) : std::runtime_error(what) {}
};

// Scenario requests a combination the implementation deliberately rejects
// (for example a maximization that is not a convex program).
class UnsupportedScenario : public std::runtime_error {
 public:
  explicit UnsupportedScenario(const std::string& what) : std::runtime_error(what) {}
};

// A declared hypothesis fails at runtime (for example a curvature constant
// that does not certify on the supplied data).
class ConditionViolation : public std::runtime_error {
 public:
  explicit ConditionViolation(const std::string& what) : std::runtime_error(what) {}
};

// A numerical routine could not produce a usable result (for example nearly
// every replicate of a simulation was quarantined).
class SolverFailure : public std::runtime_error {
 public:
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

// splitmix64 step; used to derive independent per-task seeds from a base seed.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic seed for (base, stream, index); scheduling independent.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return mix64(mix64(base ^ 0x6a09e667f3bcc908ULL) + mix64(stream) + 0x9e3779b97f4a7c15ULL * index);
}

// Runs fn(i) for i in [0, count); results must be written by index so the
// outcome does not depend on the worker count.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

double log_sum_exp(const std::vector<double>& terms);

}  // namespace erm
