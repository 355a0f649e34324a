#pragma once

#include <cstdint>
#include <vector>

#include "slidemil/bagio/splits.hpp"
#include "slidemil/harness/train.hpp"

namespace slidemil::harness {

struct Ensemble {
  bagio::SplitPlan plan;  // member m validates on part m and trains on the rest
  std::vector<TrainResult> members;
};

std::uint64_t ensemble_member_seed(std::uint64_t seed, std::size_t member);

/// Trains k members on a label-stratified patient-level k-fold rotation, so
/// each member sees a (k-1)/k train, 1/k validation split. Needs at least k
/// patients per class.
Ensemble train_ensemble(const TrainConfig& config, const std::vector<bagio::FeatureBag>& bags, std::size_t k,
                        std::uint64_t seed, unsigned workers = 1);

/// Arithmetic mean of the members' effective-class probabilities.
double ensemble_predict(const Ensemble& ensemble, const bagio::FeatureBag& bag);
metrics::PredictionSet ensemble_predict(const Ensemble& ensemble, const BagRefs& bags);

}  // namespace slidemil::harness
