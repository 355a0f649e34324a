#pragma once

#include <cstdint>
#include <vector>

#include "slidemil/bagio/bag.hpp"
#include "slidemil/common/rng.hpp"
#include "slidemil/harness/config.hpp"
#include "slidemil/metrics/metrics.hpp"
#include "slidemil/mil/model.hpp"

namespace slidemil::harness {

using BagRefs = std::vector<const bagio::FeatureBag*>;

/// Indices of the regions used for one epoch: all N (in order) when N ≤ P,
/// otherwise P distinct indices drawn uniformly, ascending.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t p, Rng& rng);

/// The bag restricted to a fresh subsample (features and coords).
bagio::FeatureBag subsample_bag(const bagio::FeatureBag& bag, std::size_t p, Rng& rng);

struct TrainResult {
  mil::MilModelParams params;  // weights from the best-validation epoch
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;  // 1-based
  std::size_t epochs_run = 0;
  std::vector<double> train_loss;  // mean per epoch
  std::vector<double> val_loss;
};

/// One Adam step per bag in a freshly shuffled order each epoch, on a fresh
/// region subsample; validation loss (full bags, no dropout) after each epoch;
/// stops once `patience` epochs pass without improvement or at max_epochs.
/// `seed` fixes initialization, order, subsampling and dropout.
TrainResult train_one(const TrainConfig& config, const BagRefs& train, const BagRefs& val, std::uint64_t seed);

/// Mean unweighted bag cross-entropy with dropout off.
double mean_loss(const mil::MilModelParams& params, const BagRefs& bags);

metrics::PredictionSet predict(const mil::MilModelParams& params, const BagRefs& bags, int fold = -1);

}  // namespace slidemil::harness
