#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "ubant/autodiff.hpp"

namespace testutil {

using ubant::ad::Shape;
using ubant::ad::Tensor;

inline Tensor randn(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(shape));
  for (double& v : t.raw()) v = n(rng);
  return t;
}

inline Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.raw()) v = u(rng);
  return t;
}

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double q : p) {
    if (q > 0) h -= q * std::log(q);
  }
  return h;
}

}  // namespace testutil
