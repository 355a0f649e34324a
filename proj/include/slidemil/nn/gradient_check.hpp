#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace slidemil::nn {

struct GradientCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = false;
};

struct GradientCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error, so that components whose true
  /// gradient is ~0 are judged on absolute error instead.
  double floor = 1e-6;
};

/// Compares `analytic` against central differences of `loss` taken by
/// perturbing each entry of `params` in place (restored afterwards).
/// relative error = |a − n| / max(|a|, |n|, floor).
GradientCheckReport gradient_check(const std::function<double()>& loss, std::span<double> params,
                                   std::span<const double> analytic, GradientCheckOptions options = {});

}  // namespace slidemil::nn
