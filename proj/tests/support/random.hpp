#pragma once

#include <random>

#include "slidemil/common/rng.hpp"
#include "slidemil/nn/matrix.hpp"

namespace testutil {

inline slidemil::nn::Matrix gaussian(std::size_t rows, std::size_t cols, slidemil::Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  slidemil::nn::Matrix m(rows, cols);
  for (double& v : m.values()) v = g(rng);
  return m;
}

}  // namespace testutil
