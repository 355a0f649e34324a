#include "slidemil/metrics/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "slidemil/common/log.hpp"

namespace slidemil::metrics {

namespace {

bool predicted_effective(double p, const MetricOptions& o) { return p >= o.threshold; }

double safe_ratio(double num, double den, const char* what) {
  if (den == 0.0) {
    log::warn(std::string(what) + " has a zero denominator; reported as 0");
    return 0.0;
  }
  return num / den;
}

double balanced_from(const ConfusionCounts& c) {
  const double pos_recall = safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn), "positive recall");
  const double neg_recall = safe_ratio(static_cast<double>(c.tn), static_cast<double>(c.tn + c.fp), "negative recall");
  return 0.5 * (pos_recall + neg_recall);
}

double accuracy_from(const ConfusionCounts& c) {
  return safe_ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.tp + c.tn + c.fp + c.fn), "accuracy");
}

double f1_from(const ConfusionCounts& c) {
  // 2·TP / (2·TP + FP + FN) is the harmonic mean of precision and recall.
  return safe_ratio(2.0 * static_cast<double>(c.tp), static_cast<double>(2 * c.tp + c.fp + c.fn), "F1");
}

}  // namespace

ConfusionCounts confusion(const PredictionSet& preds, const MetricOptions& options) {
  ConfusionCounts c;
  for (const auto& p : preds) {
    const bool truth_pos = p.truth == options.positive;
    const bool pred_pos = predicted_effective(p.probability, options) == (options.positive == Label::effective);
    if (truth_pos && pred_pos) ++c.tp;
    else if (truth_pos) ++c.fn;
    else if (pred_pos) ++c.fp;
    else ++c.tn;
  }
  return c;
}

double auc(const PredictionSet& preds) { return evaluate(Metric::auc, preds); }

double balanced_accuracy(const PredictionSet& preds, const MetricOptions& options) {
  return balanced_from(confusion(preds, options));
}

double accuracy(const PredictionSet& preds, const MetricOptions& options) {
  return accuracy_from(confusion(preds, options));
}

double f1(const PredictionSet& preds, const MetricOptions& options) { return f1_from(confusion(preds, options)); }

RocCurve roc_curve(const PredictionSet& preds) {
  std::uint64_t pos = 0, neg = 0;
  for (const auto& p : preds) (p.truth == Label::effective ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw DegenerateError("ROC curve needs both classes");

  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].probability > preds[b].probability; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::uint64_t tp = 0, fp = 0, twice_area = 0;  // area in units of 1/(2·pos·neg)
  for (std::size_t i = 0; i < order.size();) {
    const double score = preds[order[i]].probability;
    const std::uint64_t tp_before = tp, fp_before = fp;
    for (; i < order.size() && preds[order[i]].probability == score; ++i)
      (preds[order[i]].truth == Label::effective ? tp : fp) += 1;
    twice_area += (fp - fp_before) * (tp + tp_before);
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos), score});
  }
  curve.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return curve;
}

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::auc: return "auc";
    case Metric::balanced_accuracy: return "balanced_accuracy";
    case Metric::accuracy: return "accuracy";
    case Metric::f1: return "f1";
  }
  return "unknown";
}

WeightedScorer::WeightedScorer(const PredictionSet& base, MetricOptions options) : options_(options) {
  score_.reserve(base.size());
  is_effective_.reserve(base.size());
  for (const auto& p : base) {
    score_.push_back(p.probability);
    is_effective_.push_back(p.truth == Label::effective);
  }
  ascending_.resize(base.size());
  std::iota(ascending_.begin(), ascending_.end(), std::size_t{0});
  std::stable_sort(ascending_.begin(), ascending_.end(),
                   [&](std::size_t a, std::size_t b) { return score_[a] < score_[b]; });
}

bool WeightedScorer::has_both_classes(std::span<const std::uint32_t> counts) const {
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < counts.size() && !(pos && neg); ++i)
    if (counts[i]) (is_effective_[i] ? pos : neg) = true;
  return pos && neg;
}

double WeightedScorer::auc(std::span<const std::uint32_t> counts) const {
  // Walk tie groups in ascending score order: each positive beats every
  // negative strictly below its group and ties with negatives inside it.
  std::uint64_t neg_below = 0, pos_total = 0, twice_concordant = 0;
  for (std::size_t i = 0; i < ascending_.size();) {
    const double score = score_[ascending_[i]];
    std::uint64_t pos_g = 0, neg_g = 0;
    for (; i < ascending_.size() && score_[ascending_[i]] == score; ++i) {
      const std::size_t k = ascending_[i];
      (is_effective_[k] ? pos_g : neg_g) += counts[k];
    }
    twice_concordant += 2 * pos_g * neg_below + pos_g * neg_g;
    neg_below += neg_g;
    pos_total += pos_g;
  }
  if (pos_total == 0 || neg_below == 0) throw DegenerateError("AUC is undefined without both classes");
  return static_cast<double>(twice_concordant) /
         (2.0 * static_cast<double>(pos_total) * static_cast<double>(neg_below));
}

ConfusionCounts WeightedScorer::confusion(std::span<const std::uint32_t> counts) const {
  ConfusionCounts c;
  const bool positive_is_effective = options_.positive == Label::effective;
  for (std::size_t i = 0; i < score_.size(); ++i) {
    if (!counts[i]) continue;
    const bool truth_pos = static_cast<bool>(is_effective_[i]) == positive_is_effective;
    const bool pred_pos = predicted_effective(score_[i], options_) == positive_is_effective;
    std::uint64_t& cell = truth_pos ? (pred_pos ? c.tp : c.fn) : (pred_pos ? c.fp : c.tn);
    cell += counts[i];
  }
  return c;
}

double WeightedScorer::evaluate(Metric metric, std::span<const std::uint32_t> counts) const {
  if (counts.size() != score_.size()) throw DimensionError("multiplicity vector does not match prediction set");
  switch (metric) {
    case Metric::auc: return auc(counts);
    case Metric::balanced_accuracy: return balanced_from(confusion(counts));
    case Metric::accuracy: return accuracy_from(confusion(counts));
    case Metric::f1: return f1_from(confusion(counts));
  }
  return 0.0;
}

double evaluate(Metric metric, const PredictionSet& preds, const MetricOptions& options) {
  if (preds.empty()) throw DegenerateError("no predictions to score");
  WeightedScorer scorer(preds, options);
  std::vector<std::uint32_t> ones(preds.size(), 1);
  return scorer.evaluate(metric, ones);
}

std::vector<int> folds_of(const PredictionSet& preds) {
  std::set<int> folds;
  for (const auto& p : preds)
    if (p.fold >= 0) folds.insert(p.fold);
  return {folds.begin(), folds.end()};
}

PredictionSet subset_fold(const PredictionSet& preds, int fold) {
  PredictionSet out;
  std::copy_if(preds.begin(), preds.end(), std::back_inserter(out), [&](const Prediction& p) { return p.fold == fold; });
  return out;
}

}  // namespace slidemil::metrics
