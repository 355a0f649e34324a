#include "slidemil/nn/gradient_check.hpp"

#include <algorithm>
#include <cmath>

#include "slidemil/common/error.hpp"

namespace slidemil::nn {

GradientCheckReport gradient_check(const std::function<double()>& loss, std::span<double> params,
                                   std::span<const double> analytic, GradientCheckOptions options) {
  if (params.size() != analytic.size())
    throw DimensionError("gradient_check: analytic gradient length does not match parameters");
  GradientCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + options.step;
    const double up = loss();
    params[i] = saved - options.step;
    const double down = loss();
    params[i] = saved;

    const double numeric = (up - down) / (2.0 * options.step);
    const double abs_err = std::abs(analytic[i] - numeric);
    const double rel_err = abs_err / std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
    if (rel_err > report.max_relative_error || !std::isfinite(rel_err)) {
      report.max_relative_error = std::isfinite(rel_err) ? rel_err : INFINITY;
      report.worst_index = i;
    }
    report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
    ++report.checked;
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace slidemil::nn
