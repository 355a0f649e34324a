#include "slidemil/harness/ensemble.hpp"

#include "slidemil/common/error.hpp"
#include "slidemil/common/parallel.hpp"

namespace slidemil::harness {

std::uint64_t ensemble_member_seed(std::uint64_t seed, std::size_t member) {
  return derive_seed(seed, {tag("ensemble"), member});
}

Ensemble train_ensemble(const TrainConfig& config, const std::vector<bagio::FeatureBag>& bags, std::size_t k,
                        std::uint64_t seed, unsigned workers) {
  if (k < 2) throw ValidationError("an ensemble needs at least 2 members", "ensemble_members");
  Ensemble ens;
  ens.plan = bagio::make_kfold(bagio::patients_of(bags), k, derive_seed(seed, {tag("ensemble-split")}));
  ens.members.resize(k);
  parallel_for(k, workers, [&](std::size_t m) {
    const auto roles = bagio::holdout_roles(ens.plan, bags, m);
    BagRefs train, val;
    for (auto i : roles.train) train.push_back(&bags[i]);
    for (auto i : roles.val) val.push_back(&bags[i]);
    ens.members[m] = train_one(config, train, val, ensemble_member_seed(seed, m));
  });
  return ens;
}

double ensemble_predict(const Ensemble& ensemble, const bagio::FeatureBag& bag) {
  if (ensemble.members.empty()) throw InputError("ensemble has no members");
  double total = 0.0;
  for (const auto& m : ensemble.members) total += mil::predict_proba(bag.features, m.params);
  return total / static_cast<double>(ensemble.members.size());
}

metrics::PredictionSet ensemble_predict(const Ensemble& ensemble, const BagRefs& bags) {
  metrics::PredictionSet out;
  for (const auto* b : bags) {
    metrics::Prediction p;
    p.slide_id = b->slide_id;
    p.patient_id = b->patient_id;
    p.truth = b->label.value_or(bagio::Label::invalid);
    p.probability = ensemble_predict(ensemble, *b);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace slidemil::harness
