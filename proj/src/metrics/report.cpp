#include "slidemil/metrics/report.hpp"

#include <charconv>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "slidemil/common/files.hpp"

namespace slidemil::metrics {

using nlohmann::ordered_json;

namespace {

bool both_classes(const PredictionSet& preds) {
  bool pos = false, neg = false;
  for (const auto& p : preds) (p.truth == Label::effective ? pos : neg) = true;
  return pos && neg;
}

ordered_json stats_json(const BootstrapStats& s) {
  return ordered_json{{"mean", s.mean},     {"std", s.std},         {"ci95_low", s.ci_low},
                      {"ci95_high", s.ci_high}, {"valid", s.valid}, {"degenerate", s.degenerate}};
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

MetricsReport build_report(const PredictionSet& preds, const BootstrapOptions& options) {
  if (preds.empty()) throw DegenerateError("no predictions to report");
  MetricsReport r;
  r.predictions = preds.size();
  r.options = options.metric_options;
  r.bootstrap_options = options;
  const bool pooled_ok = both_classes(preds);
  for (Metric m : kAllMetrics) {
    if (pooled_ok || m == Metric::accuracy)
      r.point[m] = evaluate(m, preds, options.metric_options);
    else
      r.point[m] = std::nullopt;
  }
  if (pooled_ok) {
    r.pooled_bootstrap = bootstrap(preds, kAllMetrics, options);
    r.roc = roc_curve(preds);
  }

  const auto folds = folds_of(preds);
  double auc_total = 0.0;
  std::size_t auc_folds = 0;
  bool every_fold_ok = !folds.empty();
  for (int f : folds) {
    const auto fp = subset_fold(preds, f);
    FoldScore s{f, fp.size(), std::nullopt};
    if (both_classes(fp)) {
      s.auc = auc(fp);
      auc_total += *s.auc;
      ++auc_folds;
    } else {
      every_fold_ok = false;
    }
    r.folds.push_back(s);
  }
  if (auc_folds > 0) r.fold_mean_auc = auc_total / static_cast<double>(auc_folds);
  if (every_fold_ok) r.fold_averaged_bootstrap = bootstrap_fold_averaged(preds, kAllMetrics, options);
  return r;
}

std::string report_to_json(const MetricsReport& r) {
  ordered_json j;
  j["predictions"] = r.predictions;
  j["threshold"] = r.options.threshold;
  j["positive_class"] = bagio::to_string(r.options.positive);
  ordered_json point;
  for (const auto& [m, v] : r.point) point[to_string(m)] = optional_json(v);
  j["pooled"] = point;

  ordered_json boot;
  boot["iterations"] = r.bootstrap_options.iterations;
  boot["seed"] = r.bootstrap_options.seed;
  boot["unit"] = r.bootstrap_options.unit == ResampleUnit::slide ? "slide" : "patient";
  ordered_json pooled_boot = ordered_json::object();
  for (const auto& [m, s] : r.pooled_bootstrap) pooled_boot[to_string(m)] = stats_json(s);
  boot["pooled"] = pooled_boot;
  ordered_json fold_boot = ordered_json::object();
  for (const auto& [m, s] : r.fold_averaged_bootstrap) fold_boot[to_string(m)] = stats_json(s);
  boot["fold_averaged"] = fold_boot;
  j["bootstrap"] = boot;

  ordered_json folds = ordered_json::array();
  for (const auto& f : r.folds) folds.push_back({{"fold", f.fold}, {"count", f.count}, {"auc", optional_json(f.auc)}});
  j["per_fold"] = folds;
  j["fold_mean_auc"] = optional_json(r.fold_mean_auc);
  j["roc_auc_trapezoid"] = r.roc.points.empty() ? ordered_json(nullptr) : ordered_json(r.roc.auc);
  return j.dump(2) + "\n";
}

std::string roc_to_csv(const RocCurve& roc) {
  std::ostringstream out;
  out << "fpr,tpr,threshold\n";
  for (const auto& p : roc.points)
    out << format_double(p.fpr) << ',' << format_double(p.tpr) << ','
        << (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) << '\n';
  return out.str();
}

std::string predictions_to_csv(const PredictionSet& preds) {
  std::ostringstream out;
  out << "slide_id,patient_id,label,probability,fold\n";
  for (const auto& p : preds)
    out << p.slide_id << ',' << p.patient_id << ',' << bagio::to_string(p.truth) << ',' << format_double(p.probability)
        << ',' << p.fold << '\n';
  return out.str();
}

PredictionSet predictions_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) != std::vector<std::string>{"slide_id", "patient_id", "label", "probability", "fold"})
    throw InputError("predictions csv: header must be slide_id,patient_id,label,probability,fold");
  PredictionSet out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != 5) throw InputError("predictions csv: expected 5 columns in '" + line + "'");
    Prediction p{f[0], f[1], bagio::parse_label(f[2]), 0.0, -1};
    auto r1 = std::from_chars(f[3].data(), f[3].data() + f[3].size(), p.probability);
    auto r2 = std::from_chars(f[4].data(), f[4].data() + f[4].size(), p.fold);
    if (r1.ec != std::errc() || r2.ec != std::errc() || !(p.probability >= 0.0 && p.probability <= 1.0))
      throw InputError("predictions csv: bad probability or fold in '" + line + "'");
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, const PredictionSet& preds) {
  write_text_atomic(path, predictions_to_csv(preds));
}

PredictionSet read_predictions(const std::filesystem::path& path) { return predictions_from_csv(read_text(path)); }

}  // namespace slidemil::metrics
