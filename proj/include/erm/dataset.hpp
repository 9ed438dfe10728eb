#pragma once

#include "erm/common.hpp"

namespace erm {

// One sample point. Scalar samples use x of size 1; covariate-response pairs
// set has_response.
struct Observation {
  Vector x;
  double y = 0.0;
  bool has_response = false;
};

enum class SampleKind { Scalar, Vector, Pair };

class Dataset {
 public:
  Dataset(SampleKind kind, std::vector<Observation> obs) : kind_(kind), obs_(std::move(obs)) {
    if (obs_.empty()) throw ArgumentError("dataset: empty");
    for (const auto& o : obs_) {
      if (kind_ == SampleKind::Scalar && o.x.size() != 1) {
        throw ArgumentError("dataset: scalar samples must have size-1 x");
      }
      if (kind_ == SampleKind::Pair && !o.has_response) {
        throw ArgumentError("dataset: pair samples need a response");
      }
    }
  }

  static Dataset scalars(const std::vector<double>& xs) {
    std::vector<Observation> obs;
    obs.reserve(xs.size());
    for (double v : xs) {
      Observation o;
      o.x = Vector::Constant(1, v);
      obs.push_back(std::move(o));
    }
    return Dataset(SampleKind::Scalar, std::move(obs));
  }

  static Dataset pairs(const std::vector<Vector>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ArgumentError("dataset: x/y count mismatch");
    std::vector<Observation> obs;
    obs.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Observation o;
      o.x = xs[i];
      o.y = ys[i];
      o.has_response = true;
      obs.push_back(std::move(o));
    }
    return Dataset(SampleKind::Pair, std::move(obs));
  }

  SampleKind kind() const { return kind_; }
  std::size_t size() const { return obs_.size(); }
  const Observation& operator[](std::size_t i) const { return obs_[i]; }
  const std::vector<Observation>& observations() const { return obs_; }

 private:
  SampleKind kind_;
  std::vector<Observation> obs_;
};

}  // namespace erm
