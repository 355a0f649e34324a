#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "slidemil/metrics/metrics.hpp"

namespace slidemil::metrics {

enum class ResampleUnit { slide, patient };

struct BootstrapOptions {
  std::size_t iterations = 100000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  ResampleUnit unit = ResampleUnit::slide;
  MetricOptions metric_options;
};

struct BootstrapStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation of the resampled values
  double ci_low = 0.0;   // 2.5th percentile
  double ci_high = 0.0;  // 97.5th percentile
  double min = 0.0;
  double max = 0.0;
  std::size_t valid = 0;       // resamples scored
  std::size_t degenerate = 0;  // single-class resamples skipped

  friend bool operator==(const BootstrapStats&, const BootstrapStats&) = default;
};

/// Bootstrap distribution summary of every metric in `metrics`, all computed
/// from the same resamples. Resample r draws from a stream derived from
/// (seed, r / block), so results do not depend on `workers`. Throws
/// DegenerateError if every resample is single-class.
std::map<Metric, BootstrapStats> bootstrap(const PredictionSet& preds, std::span<const Metric> metrics,
                                           const BootstrapOptions& options);

BootstrapStats bootstrap(const PredictionSet& preds, Metric metric, const BootstrapOptions& options);

/// Fold-averaged variant: each resample draws within every fold separately and
/// records the mean over folds of the per-fold metric. Predictions must carry
/// fold ids.
std::map<Metric, BootstrapStats> bootstrap_fold_averaged(const PredictionSet& preds, std::span<const Metric> metrics,
                                                         const BootstrapOptions& options);

/// Summary over explicit resamples given as index lists into `preds`.
BootstrapStats bootstrap_from_resamples(const PredictionSet& preds, Metric metric,
                                        const std::vector<std::vector<std::size_t>>& resamples,
                                        const MetricOptions& options = {});

/// Mean, population std, and linear-interpolated 2.5/97.5 percentiles.
BootstrapStats summarize(std::vector<double> values, std::size_t degenerate);

}  // namespace slidemil::metrics
