#include "slidemil/harness/grid.hpp"

#include <algorithm>
#include <sstream>

#include "slidemil/common/error.hpp"
#include "slidemil/common/files.hpp"
#include "slidemil/common/parallel.hpp"

namespace slidemil::harness {

std::uint64_t tune_run_seed(std::uint64_t seed, std::size_t stage, std::size_t config_index, std::size_t repeat,
                            std::size_t fold) {
  return derive_seed(seed, {tag("tune"), stage, config_index, repeat, fold});
}

std::size_t count_runs(const std::vector<GridStage>& stages, std::size_t folds) {
  std::size_t total = 0;
  for (const auto& s : stages) total += grid_size(s) * s.repeats * folds;
  return total;
}

GridSearchResult grid_search(const std::vector<GridStage>& stages, const TrainConfig& base,
                             const std::vector<FoldData>& folds, std::uint64_t seed, unsigned workers) {
  if (stages.empty()) throw ValidationError("no tuning stages given", "tuning.stages");
  if (folds.empty()) throw ValidationError("no folds given", "folds");

  GridSearchResult result;
  std::vector<std::vector<TrainConfig>> configs;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    configs.push_back(expand_grid(stages[s], base));
    if (configs.back().empty()) throw ValidationError("stage expands to an empty grid", "tuning.stages");
    for (std::size_t c = 0; c < configs[s].size(); ++c)
      for (std::size_t r = 0; r < stages[s].repeats; ++r)
        for (std::size_t f = 0; f < folds.size(); ++f) result.runs.push_back({s, c, r, f, 0.0, 0, {}, {}});
  }

  parallel_for(result.runs.size(), workers, [&](std::size_t i) {
    TuneRun& run = result.runs[i];
    const TrainConfig& cfg = configs[run.stage][run.config_index];
    const FoldData& d = folds[run.fold];
    const auto trained = train_one(cfg, d.train, d.val, tune_run_seed(seed, run.stage, run.config_index, run.repeat, run.fold));
    run.val_loss = trained.best_val_loss;
    run.epochs = trained.epochs_run;
    run.val_auc = score_set(trained.params, d.val, predict(trained.params, d.val)).auc;
    if (!d.test.empty()) run.test_auc = score_set(trained.params, d.test, predict(trained.params, d.test)).auc;
  });

  std::size_t next = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    for (std::size_t c = 0; c < configs[s].size(); ++c) {
      TuneResult t{s, c, configs[s][c], 0.0, {}};
      for (std::size_t k = 0; k < stages[s].repeats * folds.size(); ++k) t.losses.push_back(result.runs[next++].val_loss);
      double total = 0.0;
      for (double l : t.losses) total += l;
      t.mean_val_loss = total / static_cast<double>(t.losses.size());
      result.ranked.push_back(std::move(t));
    }
  }
  // Insertion order is (stage, index), so a stable sort breaks ties toward
  // the earlier stage and lower index.
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const TuneResult& a, const TuneResult& b) { return a.mean_val_loss < b.mean_val_loss; });
  result.winner = result.ranked.front();
  return result;
}

std::string tuning_report_csv(const GridSearchResult& result) {
  std::vector<const TrainConfig*> config_of(result.runs.size());
  std::ostringstream out;
  out << "stage,config_index,repeat,fold,learning_rate,dropout,l2_weight,attention_dim,patches_per_slide,clam_B,"
         "epochs,val_loss,val_auc,test_auc\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& run : result.runs) {
    const auto it = std::find_if(result.ranked.begin(), result.ranked.end(), [&](const TuneResult& t) {
      return t.stage == run.stage && t.config_index == run.config_index;
    });
    const TrainConfig& c = it->config;
    out << run.stage << ',' << run.config_index << ',' << run.repeat << ',' << run.fold << ','
        << format_double(c.learning_rate) << ',' << format_double(c.dropout) << ',' << format_double(c.l2_weight) << ','
        << c.attention_dim << ',' << c.patches_per_slide << ',' << (c.clam ? std::to_string(c.clam->top_k) : "") << ','
        << run.epochs << ',' << format_double(run.val_loss) << ',' << opt(run.val_auc) << ',' << opt(run.test_auc)
        << '\n';
  }
  return out.str();
}

}  // namespace slidemil::harness
