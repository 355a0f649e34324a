#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slidemil/mil/model.hpp"

namespace slidemil::harness {

/// One training run's settings. The first five fields are the tuned ones;
/// defaults are the final selection of the reference tuning.
struct TrainConfig {
  double learning_rate = 1e-3;
  double dropout = 0.85;
  double l2_weight = 0.5;
  std::size_t attention_dim = 16;
  std::size_t patches_per_slide = 75;

  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  bool class_weights = false;  // inverse-frequency weights in the bag loss
  std::optional<mil::ClamConfig> clam;

  friend bool operator==(const TrainConfig& a, const TrainConfig& b);
};

void validate(const TrainConfig& config);

/// Option lists for one tuning stage. An empty list keeps the base config's
/// value for that field.
struct GridStage {
  std::vector<double> learning_rate;
  std::vector<double> dropout;
  std::vector<double> l2_weight;
  std::vector<std::size_t> attention_dim;
  std::vector<std::size_t> patches_per_slide;
  std::vector<std::size_t> clam_top_k;  // only meaningful with a CLAM base config
  std::size_t repeats = 3;
};

/// Cartesian product in field order (learning rate outermost, CLAM B innermost).
std::vector<TrainConfig> expand_grid(const GridStage& stage, const TrainConfig& base);
std::size_t grid_size(const GridStage& stage);

/// The three option columns of the reference tuning table, stage by stage.
std::vector<GridStage> reference_stages();

/// Everything a config file can set.
struct ExperimentConfig {
  TrainConfig train;
  std::size_t folds = 5;
  std::size_t ensemble_members = 4;
  std::vector<GridStage> stages;
};

/// Parses the JSON config format documented in the README. Unknown keys and
/// out-of-range values raise ValidationError naming the key.
ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& config);

}  // namespace slidemil::harness
