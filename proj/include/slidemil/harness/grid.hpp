#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slidemil/harness/cv.hpp"

namespace slidemil::harness {

/// One training run inside the grid: (stage, config, repeat, fold).
struct TuneRun {
  std::size_t stage = 0;
  std::size_t config_index = 0;  // within the stage
  std::size_t repeat = 0;
  std::size_t fold = 0;
  double val_loss = 0.0;
  std::size_t epochs = 0;
  std::optional<double> val_auc;
  std::optional<double> test_auc;  // reported only; never used for selection
};

struct TuneResult {
  std::size_t stage = 0;
  std::size_t config_index = 0;
  TrainConfig config;
  double mean_val_loss = 0.0;
  std::vector<double> losses;  // repeat-major, fold-minor
};

struct GridSearchResult {
  std::vector<TuneResult> ranked;  // ascending mean validation loss
  TuneResult winner;
  std::vector<TuneRun> runs;  // (stage, config, repeat, fold) order
};

std::uint64_t tune_run_seed(std::uint64_t seed, std::size_t stage, std::size_t config_index, std::size_t repeat,
                            std::size_t fold);

/// Number of training runs grid_search performs for these stages and folds.
std::size_t count_runs(const std::vector<GridStage>& stages, std::size_t folds);

/// Evaluates every configuration of every stage, `repeats` times on every
/// fold. The winner minimizes the validation loss averaged over folds and
/// repeats; ties go to the earlier stage, then the lower index. Test bags are
/// only ever scored after training, for the report.
GridSearchResult grid_search(const std::vector<GridStage>& stages, const TrainConfig& base,
                             const std::vector<FoldData>& folds, std::uint64_t seed, unsigned workers = 1);

/// CSV with one row per run: stage,config_index,repeat,fold,learning_rate,
/// dropout,l2_weight,attention_dim,patches_per_slide,clam_B,epochs,val_loss,
/// val_auc,test_auc.
std::string tuning_report_csv(const GridSearchResult& result);

}  // namespace slidemil::harness
