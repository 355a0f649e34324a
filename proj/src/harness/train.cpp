#include "slidemil/harness/train.hpp"

#include <algorithm>
#include <array>
#include <limits>

#include "slidemil/common/error.hpp"
#include "slidemil/nn/adam.hpp"

namespace slidemil::harness {

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t p, Rng& rng) {
  if (p < 1) throw ValidationError("must be >= 1", "patches_per_slide");
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  if (n <= p) return all;
  std::vector<std::size_t> picked;
  picked.reserve(p);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), p, rng);
  return picked;
}

bagio::FeatureBag subsample_bag(const bagio::FeatureBag& bag, std::size_t p, Rng& rng) {
  const auto idx = subsample_indices(bag.size(), p, rng);
  bagio::FeatureBag out{bag.slide_id, bag.patient_id, bag.label, nn::gather_rows(bag.features, idx), {}};
  for (std::size_t i : idx) out.coords.push_back(bag.coords.at(i));
  return out;
}

namespace {

std::size_t label_of(const bagio::FeatureBag& bag) {
  if (!bag.label) throw ValidationError("bag '" + bag.slide_id + "' is unlabeled");
  return static_cast<std::size_t>(*bag.label);
}

}  // namespace

double mean_loss(const mil::MilModelParams& params, const BagRefs& bags) {
  if (bags.empty()) throw ValidationError("no bags to score");
  double total = 0.0;
  for (const auto* b : bags) {
    auto r = mil::forward_bag(b->features, params, nn::DropoutSpec::inference(), nullptr, false);
    total += nn::cross_entropy(r.logits, label_of(*b)).loss;
  }
  return total / static_cast<double>(bags.size());
}

metrics::PredictionSet predict(const mil::MilModelParams& params, const BagRefs& bags, int fold) {
  metrics::PredictionSet out;
  out.reserve(bags.size());
  for (const auto* b : bags)
    out.push_back({b->slide_id, b->patient_id, b->label.value_or(bagio::Label::invalid),
                   mil::predict_proba(b->features, params), fold});
  return out;
}

TrainResult train_one(const TrainConfig& config, const BagRefs& train, const BagRefs& val, std::uint64_t seed) {
  validate(config);
  if (train.empty()) throw ValidationError("training set is empty");
  if (val.empty()) throw ValidationError("validation set is empty");
  std::array<std::size_t, 2> class_count{};
  for (const auto* b : train) ++class_count[label_of(*b)];
  if (class_count[0] == 0 || class_count[1] == 0) throw DegenerateError("training set contains a single class");
  const std::size_t dim = train.front()->dim();
  for (const auto* b : train)
    if (b->dim() != dim) throw DimensionError("training bags disagree on feature dimension");

  std::array<double, 2> class_weight{1.0, 1.0};
  if (config.class_weights)
    for (std::size_t c = 0; c < 2; ++c)
      class_weight[c] = static_cast<double>(train.size()) / (2.0 * static_cast<double>(class_count[c]));

  TrainResult result;
  mil::MilModelParams params =
      mil::MilModelParams::initialize(dim, config.attention_dim, config.clam.has_value(), derive_seed(seed, {tag("init")}));
  std::vector<nn::Matrix*> tensors = params.tensors();
  std::vector<const nn::Matrix*> shapes(tensors.begin(), tensors.end());
  nn::AdamState adam(shapes, {config.learning_rate, config.l2_weight});

  Rng order_rng = make_rng(seed, {tag("order")});
  Rng sample_rng = make_rng(seed, {tag("subsample")});
  Rng dropout_rng = make_rng(seed, {tag("dropout")});
  const auto dropout = nn::DropoutSpec::training(config.dropout);

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t i : order) {
      const auto& bag = *train[i];
      const std::size_t label = label_of(bag);
      const auto idx = subsample_indices(bag.size(), config.patches_per_slide, sample_rng);
      const nn::Matrix x = idx.size() == bag.size() ? bag.features : nn::gather_rows(bag.features, idx);

      const auto fwd = mil::forward_bag(x, params, dropout, &dropout_rng);
      // Single-region bags have nothing to cluster and fall back to the bag loss.
      const mil::BagLoss loss = config.clam && x.rows() >= 2
                              ? mil::clam_loss(fwd, params, label, *config.clam, class_weight[label])
                              : mil::backward_bag(fwd, params, label, class_weight[label]);
      epoch_loss += loss.loss;
      auto grad_tensors = loss.grads.tensors();
      std::vector<const nn::Matrix*> grads(grad_tensors.begin(), grad_tensors.end());
      adam.step(tensors, grads);
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(train.size()));

    const double v = mean_loss(params, val);
    result.val_loss.push_back(v);
    result.epochs_run = epoch;
    if (v < result.best_val_loss) {
      result.best_val_loss = v;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= config.patience) break;
  }
  if (result.best_epoch == 0) result.params = params;  // every val loss was NaN
  return result;
}

}  // namespace slidemil::harness
