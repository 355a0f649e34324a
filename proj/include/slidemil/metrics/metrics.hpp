#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "slidemil/bagio/bag.hpp"

namespace slidemil::metrics {

using bagio::Label;

struct Prediction {
  std::string slide_id;
  std::string patient_id;
  Label truth = Label::invalid;
  double probability = 0.5;  // P(effective)
  int fold = -1;             // producing CV fold, -1 when not from CV
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

using PredictionSet = std::vector<Prediction>;

struct MetricOptions {
  double threshold = 0.5;             // predicted effective iff probability ≥ threshold
  Label positive = Label::effective;  // positive class for precision/recall/F1
};

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

ConfusionCounts confusion(const PredictionSet& preds, const MetricOptions& options = {});

/// Mann–Whitney AUC with P(effective) as the score and effective as the
/// positive class: (concordant + ½·tied) / (#pos · #neg), counted exactly.
/// Throws DegenerateError unless both classes are present.
double auc(const PredictionSet& preds);

/// Mean per-class recall. A class with no members contributes 0 (warned).
double balanced_accuracy(const PredictionSet& preds, const MetricOptions& options = {});
double accuracy(const PredictionSet& preds, const MetricOptions& options = {});
/// F1 of the positive class; 0 (warned) when precision or recall is undefined.
double f1(const PredictionSet& preds, const MetricOptions& options = {});

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // +inf for the (0,0) anchor
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) … (1,1), non-decreasing
  double auc = 0.0;              // trapezoidal
};

/// Threshold sweep over the distinct scores in descending order.
RocCurve roc_curve(const PredictionSet& preds);

enum class Metric { auc, balanced_accuracy, accuracy, f1 };
inline constexpr Metric kAllMetrics[] = {Metric::auc, Metric::balanced_accuracy, Metric::accuracy, Metric::f1};
std::string to_string(Metric metric);

/// Scores a multiset of predictions given as per-item multiplicities over a
/// base set, so resamples never copy predictions. Items are taken in the
/// base set's order.
class WeightedScorer {
 public:
  explicit WeightedScorer(const PredictionSet& base, MetricOptions options = {});

  std::size_t size() const noexcept { return score_.size(); }
  /// Both classes present among items with nonzero multiplicity.
  bool has_both_classes(std::span<const std::uint32_t> counts) const;
  double evaluate(Metric metric, std::span<const std::uint32_t> counts) const;

 private:
  double auc(std::span<const std::uint32_t> counts) const;
  ConfusionCounts confusion(std::span<const std::uint32_t> counts) const;

  MetricOptions options_;
  std::vector<double> score_;
  std::vector<std::uint8_t> is_effective_;
  std::vector<std::size_t> ascending_;  // indices sorted by score
};

double evaluate(Metric metric, const PredictionSet& preds, const MetricOptions& options = {});

/// Distinct fold ids present, ascending (−1 excluded).
std::vector<int> folds_of(const PredictionSet& preds);
PredictionSet subset_fold(const PredictionSet& preds, int fold);

}  // namespace slidemil::metrics
