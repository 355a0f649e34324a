#include "slidemil/metrics/bootstrap.hpp"

#include <algorithm>
#include <cmath>

#include "slidemil/common/parallel.hpp"
#include "slidemil/common/rng.hpp"

namespace slidemil::metrics {

namespace {

constexpr std::size_t kBlock = 1024;

double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Groups of base indices drawn together (one per slide, or per patient).
std::vector<std::vector<std::size_t>> resample_units(const PredictionSet& preds, ResampleUnit unit) {
  std::vector<std::vector<std::size_t>> units;
  if (unit == ResampleUnit::slide) {
    for (std::size_t i = 0; i < preds.size(); ++i) units.push_back({i});
    return units;
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto [it, inserted] = index.try_emplace(preds[i].patient_id, units.size());
    if (inserted) units.emplace_back();
    units[it->second].push_back(i);
  }
  return units;
}

void draw(const std::vector<std::vector<std::size_t>>& units, Rng& rng, std::vector<std::uint32_t>& counts) {
  std::uniform_int_distribution<std::size_t> pick(0, units.size() - 1);
  for (std::size_t u = 0; u < units.size(); ++u)
    for (std::size_t i : units[pick(rng)]) ++counts[i];
}

std::map<Metric, BootstrapStats> collect(std::span<const Metric> metrics, std::size_t iterations,
                                         const std::vector<std::vector<double>>& values,
                                         const std::vector<std::uint8_t>& ok) {
  std::map<Metric, BootstrapStats> out;
  std::size_t degenerate = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), std::uint8_t{0}));
  if (degenerate == iterations) throw DegenerateError("every bootstrap resample was single-class");
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    std::vector<double> kept;
    kept.reserve(iterations - degenerate);
    for (std::size_t r = 0; r < iterations; ++r)
      if (ok[r]) kept.push_back(values[m][r]);
    out[metrics[m]] = summarize(std::move(kept), degenerate);
  }
  return out;
}

}  // namespace

BootstrapStats summarize(std::vector<double> values, std::size_t degenerate) {
  if (values.empty()) throw DegenerateError("no values to summarize");
  std::sort(values.begin(), values.end());
  BootstrapStats s;
  s.valid = values.size();
  s.degenerate = degenerate;
  s.min = values.front();
  s.max = values.back();
  s.ci_low = percentile(values, 0.025);
  s.ci_high = percentile(values, 0.975);
  if (s.min == s.max) {
    s.mean = s.min;
    return s;
  }
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = std::clamp(total / static_cast<double>(values.size()), s.min, s.max);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size()));
  return s;
}

std::map<Metric, BootstrapStats> bootstrap(const PredictionSet& preds, std::span<const Metric> metrics,
                                           const BootstrapOptions& options) {
  if (options.iterations == 0) throw ValidationError("must be >= 1", "iterations");
  if (preds.empty()) throw DegenerateError("no predictions to bootstrap");
  const WeightedScorer scorer(preds, options.metric_options);
  const auto units = resample_units(preds, options.unit);

  std::vector<std::vector<double>> values(metrics.size(), std::vector<double>(options.iterations));
  std::vector<std::uint8_t> ok(options.iterations, 0);
  const std::size_t blocks = (options.iterations + kBlock - 1) / kBlock;
  parallel_for(blocks, options.workers, [&](std::size_t b) {
    Rng rng = make_rng(options.seed, {tag("bootstrap"), b});
    std::vector<std::uint32_t> counts(preds.size());
    const std::size_t end = std::min(options.iterations, (b + 1) * kBlock);
    for (std::size_t r = b * kBlock; r < end; ++r) {
      std::fill(counts.begin(), counts.end(), 0u);
      draw(units, rng, counts);
      if (!scorer.has_both_classes(counts)) continue;
      ok[r] = 1;
      for (std::size_t m = 0; m < metrics.size(); ++m) values[m][r] = scorer.evaluate(metrics[m], counts);
    }
  });
  return collect(metrics, options.iterations, values, ok);
}

BootstrapStats bootstrap(const PredictionSet& preds, Metric metric, const BootstrapOptions& options) {
  const Metric one[] = {metric};
  return bootstrap(preds, one, options).at(metric);
}

std::map<Metric, BootstrapStats> bootstrap_fold_averaged(const PredictionSet& preds, std::span<const Metric> metrics,
                                                         const BootstrapOptions& options) {
  if (options.iterations == 0) throw ValidationError("must be >= 1", "iterations");
  const auto folds = folds_of(preds);
  if (folds.empty()) throw ValidationError("predictions carry no fold ids");

  std::vector<PredictionSet> fold_preds;
  std::vector<WeightedScorer> scorers;
  std::vector<std::vector<std::vector<std::size_t>>> fold_units;
  for (int f : folds) {
    fold_preds.push_back(subset_fold(preds, f));
    scorers.emplace_back(fold_preds.back(), options.metric_options);
    fold_units.push_back(resample_units(fold_preds.back(), options.unit));
  }

  std::vector<std::vector<double>> values(metrics.size(), std::vector<double>(options.iterations));
  std::vector<std::uint8_t> ok(options.iterations, 0);
  const std::size_t blocks = (options.iterations + kBlock - 1) / kBlock;
  parallel_for(blocks, options.workers, [&](std::size_t b) {
    Rng rng = make_rng(options.seed, {tag("bootstrap-folds"), b});
    std::vector<std::vector<std::uint32_t>> counts(folds.size());
    const std::size_t end = std::min(options.iterations, (b + 1) * kBlock);
    for (std::size_t r = b * kBlock; r < end; ++r) {
      bool usable = true;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        counts[f].assign(fold_preds[f].size(), 0u);
        draw(fold_units[f], rng, counts[f]);
        usable = usable && scorers[f].has_both_classes(counts[f]);
      }
      if (!usable) continue;
      ok[r] = 1;
      for (std::size_t m = 0; m < metrics.size(); ++m) {
        double total = 0.0;
        for (std::size_t f = 0; f < folds.size(); ++f) total += scorers[f].evaluate(metrics[m], counts[f]);
        values[m][r] = total / static_cast<double>(folds.size());
      }
    }
  });
  return collect(metrics, options.iterations, values, ok);
}

BootstrapStats bootstrap_from_resamples(const PredictionSet& preds, Metric metric,
                                        const std::vector<std::vector<std::size_t>>& resamples,
                                        const MetricOptions& options) {
  const WeightedScorer scorer(preds, options);
  std::vector<double> values;
  std::size_t degenerate = 0;
  std::vector<std::uint32_t> counts(preds.size());
  for (const auto& sample : resamples) {
    std::fill(counts.begin(), counts.end(), 0u);
    for (std::size_t i : sample) {
      if (i >= preds.size()) throw ValidationError("resample index out of range");
      ++counts[i];
    }
    if (!scorer.has_both_classes(counts)) {
      ++degenerate;
      continue;
    }
    values.push_back(scorer.evaluate(metric, counts));
  }
  if (values.empty()) throw DegenerateError("every bootstrap resample was single-class");
  return summarize(std::move(values), degenerate);
}

}  // namespace slidemil::metrics
