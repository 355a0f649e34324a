#include "slidemil/harness/config.hpp"

#include <json.hpp>
#include <set>

#include "slidemil/common/error.hpp"

namespace slidemil::harness {

using nlohmann::json;
using nlohmann::ordered_json;

bool operator==(const TrainConfig& a, const TrainConfig& b) {
  auto clam_eq = [](const auto& x, const auto& y) {
    if (x.has_value() != y.has_value()) return false;
    return !x || (x->top_k == y->top_k && x->instance_loss_weight == y->instance_loss_weight);
  };
  return a.learning_rate == b.learning_rate && a.dropout == b.dropout && a.l2_weight == b.l2_weight &&
         a.attention_dim == b.attention_dim && a.patches_per_slide == b.patches_per_slide &&
         a.max_epochs == b.max_epochs && a.patience == b.patience && a.seed == b.seed &&
         a.class_weights == b.class_weights && clam_eq(a.clam, b.clam);
}

void validate(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0)) throw ValidationError("must be >= 0", "learning_rate");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ValidationError("must lie in [0, 1)", "dropout");
  if (!(c.l2_weight >= 0.0)) throw ValidationError("must be >= 0", "l2_weight");
  if (c.attention_dim < 2 || c.attention_dim % 2 != 0) throw ValidationError("must be even and >= 2", "attention_dim");
  if (c.patches_per_slide < 1) throw ValidationError("must be >= 1", "patches_per_slide");
  if (c.max_epochs < 1) throw ValidationError("must be >= 1", "max_epochs");
  if (c.clam) {
    if (c.clam->top_k < 1) throw ValidationError("must be >= 1", "clam.B");
    if (!(c.clam->instance_loss_weight >= 0.0 && c.clam->instance_loss_weight <= 1.0))
      throw ValidationError("must lie in [0, 1]", "clam.instance_loss_weight");
  }
}

std::size_t grid_size(const GridStage& s) {
  auto n = [](const auto& v) { return std::max<std::size_t>(1, v.size()); };
  return n(s.learning_rate) * n(s.dropout) * n(s.l2_weight) * n(s.attention_dim) * n(s.patches_per_slide) *
         n(s.clam_top_k);
}

std::vector<TrainConfig> expand_grid(const GridStage& stage, const TrainConfig& base) {
  if (stage.repeats < 1) throw ValidationError("must be >= 1", "repeats");
  if (!stage.clam_top_k.empty() && !base.clam) throw ValidationError("CLAM option list on a non-CLAM model", "clam_B");
  auto or_base = [](const auto& list, auto value) {
    using T = decltype(value);
    return list.empty() ? std::vector<T>{value} : std::vector<T>(list.begin(), list.end());
  };
  const auto lrs = or_base(stage.learning_rate, base.learning_rate);
  const auto drops = or_base(stage.dropout, base.dropout);
  const auto l2s = or_base(stage.l2_weight, base.l2_weight);
  const auto attns = or_base(stage.attention_dim, base.attention_dim);
  const auto patches = or_base(stage.patches_per_slide, base.patches_per_slide);
  const auto bs = or_base(stage.clam_top_k, base.clam ? base.clam->top_k : std::size_t{0});

  std::vector<TrainConfig> out;
  for (double lr : lrs)
    for (double dp : drops)
      for (double l2 : l2s)
        for (std::size_t at : attns)
          for (std::size_t pp : patches)
            for (std::size_t b : bs) {
              TrainConfig c = base;
              c.learning_rate = lr;
              c.dropout = dp;
              c.l2_weight = l2;
              c.attention_dim = at;
              c.patches_per_slide = pp;
              if (c.clam) c.clam->top_k = b;
              validate(c);
              out.push_back(c);
            }
  return out;
}

std::vector<GridStage> reference_stages() {
  return {
      {{1e-3, 1e-4, 1e-5}, {0.25, 0.5, 0.75}, {1e-2, 1e-3, 1e-4}, {64, 32, 16}, {25, 50, 75}, {}, 3},
      {{1e-3, 5e-4, 1e-4}, {0.6, 0.75, 0.9}, {1e-1, 1e-2, 1e-3}, {32, 16, 8}, {25, 50, 75}, {}, 3},
      {{1e-3, 5e-4}, {0.8, 0.85, 0.9, 0.95}, {1.0, 5e-1, 1e-1, 5e-2}, {32, 16}, {50, 75, 100}, {}, 3},
  };
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& prefix) {
  if (!obj.is_object()) throw ValidationError("must be an object", prefix.empty() ? "<root>" : prefix);
  for (const auto& [key, value] : obj.items())
    if (!allowed.contains(key)) throw ValidationError("unknown key", prefix.empty() ? key : prefix + "." + key);
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!obj.at(key).is_number_unsigned()) throw ValidationError("must be a non-negative integer", path);
    }
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("has the wrong type", path);
  }
}

template <typename T>
std::vector<T> get_list(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) return {};
  const json& v = obj.at(key);
  if (!v.is_array() || v.empty()) throw ValidationError("must be a non-empty array", path);
  std::vector<T> out;
  for (const auto& item : v) {
    if constexpr (std::is_same_v<T, std::size_t>) {
      if (!item.is_number_unsigned()) throw ValidationError("entries must be non-negative integers", path);
    } else if (!item.is_number()) {
      throw ValidationError("entries must be numbers", path);
    }
    out.push_back(item.get<T>());
  }
  return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, {"train", "folds", "ensemble_members", "tuning"}, "");

  ExperimentConfig cfg;
  if (root.contains("train")) {
    const json& t = root.at("train");
    reject_unknown(t,
                   {"learning_rate", "dropout", "l2_weight", "attention_dim", "patches_per_slide", "max_epochs",
                    "patience", "seed", "class_weights", "clam"},
                   "train");
    TrainConfig& c = cfg.train;
    c.learning_rate = get(t, "learning_rate", "train.learning_rate", c.learning_rate);
    c.dropout = get(t, "dropout", "train.dropout", c.dropout);
    c.l2_weight = get(t, "l2_weight", "train.l2_weight", c.l2_weight);
    c.attention_dim = get(t, "attention_dim", "train.attention_dim", c.attention_dim);
    c.patches_per_slide = get(t, "patches_per_slide", "train.patches_per_slide", c.patches_per_slide);
    c.max_epochs = get(t, "max_epochs", "train.max_epochs", c.max_epochs);
    c.patience = get(t, "patience", "train.patience", c.patience);
    c.seed = get<std::uint64_t>(t, "seed", "train.seed", c.seed);
    c.class_weights = get(t, "class_weights", "train.class_weights", c.class_weights);
    if (t.contains("clam") && !t.at("clam").is_null()) {
      const json& cl = t.at("clam");
      reject_unknown(cl, {"B", "instance_loss_weight"}, "train.clam");
      mil::ClamConfig clam;
      clam.top_k = get(cl, "B", "train.clam.B", clam.top_k);
      clam.instance_loss_weight = get(cl, "instance_loss_weight", "train.clam.instance_loss_weight",
                                      clam.instance_loss_weight);
      c.clam = clam;
    }
    try {
      validate(c);
    } catch (const ValidationError& e) {
      throw ValidationError(e.message(), "train." + e.key());
    }
  }
  cfg.folds = get(root, "folds", "folds", cfg.folds);
  if (cfg.folds < 3) throw ValidationError("must be >= 3", "folds");
  cfg.ensemble_members = get(root, "ensemble_members", "ensemble_members", cfg.ensemble_members);
  if (cfg.ensemble_members < 2) throw ValidationError("must be >= 2", "ensemble_members");

  if (root.contains("tuning")) {
    const json& tu = root.at("tuning");
    reject_unknown(tu, {"repeats", "stages"}, "tuning");
    const std::size_t repeats = get(tu, "repeats", "tuning.repeats", std::size_t{3});
    if (repeats < 1) throw ValidationError("must be >= 1", "tuning.repeats");
    if (!tu.contains("stages") || !tu.at("stages").is_array() || tu.at("stages").empty())
      throw ValidationError("must be a non-empty array", "tuning.stages");
    std::size_t i = 0;
    for (const json& st : tu.at("stages")) {
      const std::string p = "tuning.stages[" + std::to_string(i++) + "]";
      reject_unknown(st, {"learning_rate", "dropout", "l2_weight", "attention_dim", "patches_per_slide", "clam_B"}, p);
      GridStage g;
      g.learning_rate = get_list<double>(st, "learning_rate", p + ".learning_rate");
      g.dropout = get_list<double>(st, "dropout", p + ".dropout");
      g.l2_weight = get_list<double>(st, "l2_weight", p + ".l2_weight");
      g.attention_dim = get_list<std::size_t>(st, "attention_dim", p + ".attention_dim");
      g.patches_per_slide = get_list<std::size_t>(st, "patches_per_slide", p + ".patches_per_slide");
      g.clam_top_k = get_list<std::size_t>(st, "clam_B", p + ".clam_B");
      g.repeats = repeats;
      try {
        expand_grid(g, cfg.train);
      } catch (const ValidationError& e) {
        throw ValidationError(e.message(), p + "." + e.key());
      }
      cfg.stages.push_back(std::move(g));
    }
  }
  return cfg;
}

std::string train_config_to_json(const TrainConfig& c) {
  ordered_json j{{"learning_rate", c.learning_rate},
                 {"dropout", c.dropout},
                 {"l2_weight", c.l2_weight},
                 {"attention_dim", c.attention_dim},
                 {"patches_per_slide", c.patches_per_slide},
                 {"max_epochs", c.max_epochs},
                 {"patience", c.patience},
                 {"seed", c.seed},
                 {"class_weights", c.class_weights}};
  j["clam"] = c.clam ? ordered_json{{"B", c.clam->top_k}, {"instance_loss_weight", c.clam->instance_loss_weight}}
                     : ordered_json(nullptr);
  return j.dump(2) + "\n";
}

}  // namespace slidemil::harness
