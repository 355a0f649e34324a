#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "slidemil/bagio/splits.hpp"
#include "slidemil/harness/train.hpp"

namespace slidemil::harness {

/// The bags playing each role in one cross-validation fold.
struct FoldData {
  BagRefs train;
  BagRefs val;
  BagRefs test;
};

/// Per-fold role views over `bags` (see bagio::cv_roles). The returned
/// pointers borrow from `bags`.
std::vector<FoldData> make_fold_data(const bagio::SplitPlan& plan, const std::vector<bagio::FeatureBag>& bags);

struct SetScores {
  double loss = 0.0;
  std::optional<double> auc;  // absent for single-class sets
  double balanced_accuracy = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

SetScores score_set(const mil::MilModelParams& params, const BagRefs& bags, const metrics::PredictionSet& preds);

struct FoldOutcome {
  std::size_t fold = 0;
  TrainResult training;
  SetScores val;
  SetScores test;
  metrics::PredictionSet test_predictions;
};

struct CvResult {
  std::vector<FoldOutcome> folds;
  metrics::PredictionSet pooled_test;  // every fold's test predictions, fold order
  std::optional<double> pooled_auc;
  double mean_val_loss = 0.0;
};

/// Stream seed of fold `fold` in a cross-validation run seeded with `seed`.
std::uint64_t cv_fold_seed(std::uint64_t seed, std::size_t fold);

/// Trains one model per fold (in parallel across `workers`) and scores it on
/// its validation and test sets.
CvResult run_cv(const TrainConfig& config, const std::vector<FoldData>& folds, std::uint64_t seed, unsigned workers = 1);

CvResult run_cv(const TrainConfig& config, const bagio::SplitPlan& plan, const std::vector<bagio::FeatureBag>& bags,
                std::uint64_t seed, unsigned workers = 1);

}  // namespace slidemil::harness
