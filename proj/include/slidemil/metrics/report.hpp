#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slidemil/metrics/bootstrap.hpp"
#include "slidemil/metrics/metrics.hpp"

namespace slidemil::metrics {

struct FoldScore {
  int fold = 0;
  std::size_t count = 0;
  std::optional<double> auc;  // absent for single-class folds
};

struct MetricsReport {
  std::size_t predictions = 0;
  MetricOptions options;
  std::map<Metric, std::optional<double>> point;  // pooled-then-scored
  BootstrapOptions bootstrap_options;
  std::map<Metric, BootstrapStats> pooled_bootstrap;
  std::vector<FoldScore> folds;
  std::optional<double> fold_mean_auc;  // mean of per-fold AUCs
  std::map<Metric, BootstrapStats> fold_averaged_bootstrap;
  RocCurve roc;
};

/// Scores the pooled predictions, bootstraps them, and, when fold ids are
/// present, reports per-fold AUCs and the fold-averaged bootstrap alongside.
MetricsReport build_report(const PredictionSet& preds, const BootstrapOptions& options);

std::string report_to_json(const MetricsReport& report);
/// CSV columns: fpr,tpr,threshold.
std::string roc_to_csv(const RocCurve& roc);

/// CSV columns: slide_id,patient_id,label,probability,fold.
std::string predictions_to_csv(const PredictionSet& preds);
PredictionSet predictions_from_csv(const std::string& text);
void write_predictions(const std::filesystem::path& path, const PredictionSet& preds);
PredictionSet read_predictions(const std::filesystem::path& path);

}  // namespace slidemil::metrics
