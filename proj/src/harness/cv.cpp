#include "slidemil/harness/cv.hpp"

#include "slidemil/common/parallel.hpp"

namespace slidemil::harness {

std::vector<FoldData> make_fold_data(const bagio::SplitPlan& plan, const std::vector<bagio::FeatureBag>& bags) {
  std::vector<FoldData> out;
  for (std::size_t f = 0; f < plan.parts; ++f) {
    const auto roles = bagio::cv_roles(plan, bags, f);
    FoldData d;
    for (auto i : roles.train) d.train.push_back(&bags[i]);
    for (auto i : roles.val) d.val.push_back(&bags[i]);
    for (auto i : roles.test) d.test.push_back(&bags[i]);
    out.push_back(std::move(d));
  }
  return out;
}

SetScores score_set(const mil::MilModelParams& params, const BagRefs& bags, const metrics::PredictionSet& preds) {
  SetScores s;
  s.loss = mean_loss(params, bags);
  bool pos = false, neg = false;
  for (const auto& p : preds) (p.truth == bagio::Label::effective ? pos : neg) = true;
  if (pos && neg) {
    s.auc = metrics::auc(preds);
    s.balanced_accuracy = metrics::balanced_accuracy(preds);
  }
  s.accuracy = metrics::accuracy(preds);
  if (pos) s.f1 = metrics::f1(preds);
  return s;
}

std::uint64_t cv_fold_seed(std::uint64_t seed, std::size_t fold) { return derive_seed(seed, {tag("cv"), fold}); }

CvResult run_cv(const TrainConfig& config, const std::vector<FoldData>& folds, std::uint64_t seed, unsigned workers) {
  CvResult result;
  result.folds.resize(folds.size());
  parallel_for(folds.size(), workers, [&](std::size_t f) {
    const FoldData& d = folds[f];
    FoldOutcome& out = result.folds[f];
    out.fold = f;
    out.training = train_one(config, d.train, d.val, cv_fold_seed(seed, f));
    out.val = score_set(out.training.params, d.val, predict(out.training.params, d.val, static_cast<int>(f)));
    if (!d.test.empty()) {
      out.test_predictions = predict(out.training.params, d.test, static_cast<int>(f));
      out.test = score_set(out.training.params, d.test, out.test_predictions);
    }
  });
  double val_total = 0.0;
  for (const auto& f : result.folds) {
    result.pooled_test.insert(result.pooled_test.end(), f.test_predictions.begin(), f.test_predictions.end());
    val_total += f.training.best_val_loss;
  }
  result.mean_val_loss = val_total / static_cast<double>(result.folds.size());
  bool pos = false, neg = false;
  for (const auto& p : result.pooled_test) (p.truth == bagio::Label::effective ? pos : neg) = true;
  if (pos && neg) result.pooled_auc = metrics::auc(result.pooled_test);
  return result;
}

CvResult run_cv(const TrainConfig& config, const bagio::SplitPlan& plan, const std::vector<bagio::FeatureBag>& bags,
                std::uint64_t seed, unsigned workers) {
  return run_cv(config, make_fold_data(plan, bags), seed, workers);
}

}  // namespace slidemil::harness
