#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slidemil/bagio/cohort.hpp"
#include "slidemil/bagio/splits.hpp"
#include "slidemil/common/error.hpp"
#include "slidemil/common/files.hpp"
#include "slidemil/common/log.hpp"
#include "slidemil/common/parallel.hpp"
#include "slidemil/harness/config.hpp"
#include "slidemil/harness/cv.hpp"
#include "slidemil/harness/ensemble.hpp"
#include "slidemil/harness/grid.hpp"
#include "slidemil/heatmap/heatmap.hpp"
#include "slidemil/metrics/report.hpp"
#include "slidemil/mil/checkpoint.hpp"
#include "slidemil/preprocess/tiling.hpp"
#include "slidemil/synth/cohort.hpp"

namespace fs = std::filesystem;
using namespace slidemil;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  int verbose = 0;
  bool quiet = false;
};

/// Marks an output directory as incomplete until the command finishes, so an
/// interrupted run is never mistaken for a finished one. Every file inside is
/// written atomically.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    write_text_atomic(marker(), "incomplete\n");
  }
  const fs::path& path() const { return dir_; }
  fs::path operator/(const fs::path& rel) const {
    const fs::path p = dir_ / rel;
    fs::create_directories(p.parent_path());
    return p;
  }
  void finish() { fs::remove(marker()); }

 private:
  fs::path marker() const { return dir_ / "_INCOMPLETE"; }
  fs::path dir_;
};

harness::ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  if (!fs::exists(path)) throw InputError("config file not found: " + path);
  return harness::parse_experiment_config(read_text(path));
}

std::uint64_t run_seed(const Globals& g, const harness::ExperimentConfig& cfg) {
  return g.seed.value_or(cfg.train.seed);
}

std::vector<bagio::FeatureBag> load_bags(const std::string& cohort, unsigned workers) {
  if (!fs::exists(cohort)) throw InputError("cohort manifest not found: " + cohort);
  auto bags = bagio::load_cohort_bags(cohort, workers);
  if (bags.empty()) throw InputError("cohort manifest lists no slides: " + cohort);
  return bags;
}

std::vector<fs::path> collect_images(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  auto is_image = [](const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".ppm";
  };
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && is_image(e.path())) out.push_back(e.path());
      }
    } else if (fs::is_regular_file(in)) {
      out.push_back(in);
    } else {
      throw InputError("input not found: " + in);
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw InputError("no input images (.png or .ppm) found");
  return out;
}

std::string opt_str(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

// Runs fn for every image and reports every failure before failing as a whole.
template <typename Fn>
void for_each_slide(const std::vector<fs::path>& images, unsigned workers, Fn&& fn) {
  std::vector<std::string> errors(images.size());
  std::vector<char> input_error(images.size(), 0);
  parallel_for(images.size(), workers, [&](std::size_t i) {
    try {
      fn(images[i]);
    } catch (const InputError& e) {
      errors[i] = e.what();
      input_error[i] = 1;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::size_t failed = 0, bad_input = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (errors[i].empty()) continue;
    ++failed;
    bad_input += input_error[i];
    std::cerr << images[i].string() << ": " << errors[i] << '\n';
  }
  const std::string msg = std::to_string(failed) + " of " + std::to_string(images.size()) + " slides failed";
  if (failed && bad_input == failed) throw InputError(msg);
  if (failed) throw Error(msg);
}

// ---- segment / tile ----------------------------------------------------------

struct SegmentArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string channel = "saturation";
  std::size_t downsample = 1;
  bool no_smooth = false;
  std::size_t thumbnail = 64;
};

preprocess::SegmentOptions segment_options(const SegmentArgs& a) {
  preprocess::SegmentOptions o;
  o.channel = preprocess::parse_channel(a.channel);
  if (a.downsample == 0) throw ValidationError("must be positive", "downsample");
  o.downsample = a.downsample;
  o.smooth = !a.no_smooth;
  return o;
}

void run_segment(const Globals& g, const SegmentArgs& a) {
  const auto images = collect_images(a.inputs);
  const auto options = segment_options(a);
  OutputDir out(a.out);
  for_each_slide(images, g.workers, [&](const fs::path& p) {
    const auto img = preprocess::read_image(p);
    const auto mask = preprocess::segment_tissue(img, options);
    const std::string stem = p.stem().string();
    write_file_atomic(out / (stem + "_mask.png"), mask.to_png());
    preprocess::write_image(out / (stem + "_thumb.png"), preprocess::make_thumbnail(img, a.thumbnail));
    log::info(stem + ": threshold " + std::to_string(mask.threshold) + ", tissue fraction " +
              format_double(mask.tissue_fraction()));
  });
  out.finish();
  std::cout << "segmented " << images.size() << " slides\n";
}

struct TileArgs {
  SegmentArgs segment;
  std::int64_t region_size = 4096;
  double min_tissue = 0.15;
  bool pad_small = false;
};

void run_tile(const Globals& g, const TileArgs& a) {
  const auto images = collect_images(a.segment.inputs);
  const auto options = segment_options(a.segment);
  preprocess::TileOptions tiles{a.region_size, a.min_tissue, a.pad_small};
  if (tiles.region_size <= 0) throw ValidationError("must be positive", "region-size");
  if (!(tiles.min_tissue_fraction >= 0.0 && tiles.min_tissue_fraction <= 1.0)) {
    throw ValidationError("must be in [0, 1]", "min-tissue");
  }
  OutputDir out(a.segment.out);
  std::vector<std::size_t> counts(images.size());
  for_each_slide(images, g.workers, [&](const fs::path& p) {
    const auto img = preprocess::read_image(p);
    const auto mask = preprocess::segment_tissue(img, options);
    const std::string stem = p.stem().string();
    const auto manifest = preprocess::tile_regions(mask, tiles, stem);
    preprocess::write_manifest(out / (stem + "_regions.csv"), manifest);
    write_file_atomic(out / (stem + "_mask.png"), mask.to_png());
    preprocess::write_image(out / (stem + "_thumb.png"), preprocess::make_thumbnail(img, a.segment.thumbnail));
  });
  out.finish();
  std::cout << "tiled " << images.size() << " slides\n";
}

// ---- synth ---------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  synth::CohortSpec spec;
  std::size_t slides_min = 1, slides_max = 6;
  std::size_t regions_min = 13, regions_max = 166;
  bool confounder = false;
  synth::ConfounderSpec conf;
  std::size_t thumbnail = 64;
};

void run_synth(const Globals& g, SynthArgs a) {
  a.spec.seed = g.seed.value_or(0);
  a.spec.slides_per_patient = {a.slides_min, a.slides_max};
  a.spec.regions_per_slide = {a.regions_min, a.regions_max};
  if (a.confounder) a.spec.confounder = a.conf;
  synth::validate(a.spec);
  const auto cohort = synth::generate_cohort(a.spec, g.workers);
  OutputDir out(a.out);
  parallel_for(cohort.bags.size(), g.workers, [&](std::size_t i) {
    const auto& id = cohort.bags[i].slide_id;
    bagio::write_bag(out / ("bags/" + id + ".fbag"), cohort.bags[i]);
    preprocess::write_manifest(out / ("regions/" + id + ".csv"), cohort.regions[i]);
    preprocess::write_image(out / ("thumbnails/" + id + ".png"), synth::layout_thumbnail(cohort.regions[i], a.thumbnail));
  });
  bagio::write_cohort(out / "cohort.csv", bagio::manifest_for(cohort.bags, "bags"));
  write_text_atomic(out / "ground_truth.json", synth::ground_truth_to_json(cohort.truth));
  out.finish();
  std::cout << "generated " << cohort.bags.size() << " slides from " << a.spec.patients
            << " patients; Bayes AUC " << format_double(cohort.truth.bayes_auc) << '\n';
}

// ---- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string cohort;
  std::string out;
  std::string config;
  std::optional<std::size_t> folds;
};

void write_model(const OutputDir& out, const std::string& stem, const mil::MilModelParams& params,
                 const harness::TrainConfig& config) {
  mil::write_checkpoint(out / ("models/" + stem + ".ckpt"), params);
  write_text_atomic(out / ("models/" + stem + ".json"), harness::train_config_to_json(config));
}

void run_train(const Globals& g, const TrainArgs& a) {
  auto cfg = load_config(a.config);
  if (a.folds) cfg.folds = *a.folds;
  if (cfg.folds < 3) throw ValidationError("cross-validation needs at least 3 folds", "folds");
  harness::validate(cfg.train);
  const std::uint64_t seed = run_seed(g, cfg);
  const auto bags = load_bags(a.cohort, g.workers);
  const auto plan = bagio::make_kfold(bagio::patients_of(bags), cfg.folds, seed);
  const auto folds = harness::make_fold_data(plan, bags);
  const auto result = harness::run_cv(cfg.train, folds, seed, g.workers);

  OutputDir out(a.out);
  bagio::write_plan(out / "splits.csv", plan);
  metrics::write_predictions(out / "predictions.csv", result.pooled_test);
  std::ostringstream fcsv, lcsv;
  fcsv << "fold,train_slides,val_slides,test_slides,epochs_run,best_epoch,best_val_loss,val_auc,test_auc,"
          "test_balanced_accuracy\n";
  lcsv << "fold,epoch,train_loss,val_loss\n";
  for (const auto& f : result.folds) {
    const auto& d = folds[f.fold];
    fcsv << f.fold << ',' << d.train.size() << ',' << d.val.size() << ',' << d.test.size() << ','
         << f.training.epochs_run << ',' << f.training.best_epoch << ',' << format_double(f.training.best_val_loss)
         << ',' << opt_str(f.val.auc) << ',' << opt_str(f.test.auc) << ','
         << format_double(f.test.balanced_accuracy) << '\n';
    for (std::size_t e = 0; e < f.training.train_loss.size(); ++e) {
      lcsv << f.fold << ',' << e + 1 << ',' << format_double(f.training.train_loss[e]) << ','
           << format_double(f.training.val_loss[e]) << '\n';
    }
    write_model(out, "fold" + std::to_string(f.fold), f.training.params, cfg.train);
  }
  write_text_atomic(out / "folds.csv", fcsv.str());
  write_text_atomic(out / "losses.csv", lcsv.str());
  out.finish();
  std::cout << "pooled test AUC " << opt_str(result.pooled_auc) << " over " << result.pooled_test.size()
            << " slides\n";
}

// ---- tune ----------------------------------------------------------------------

struct TuneArgs {
  std::string cohort;
  std::string out;
  std::string config;
  bool reference_grid = false;
  std::optional<std::size_t> folds;
};

void run_tune(const Globals& g, const TuneArgs& a) {
  auto cfg = load_config(a.config);
  if (a.folds) cfg.folds = *a.folds;
  if (a.reference_grid) cfg.stages = harness::reference_stages();
  if (cfg.stages.empty()) {
    throw ValidationError("no tuning stages; add tuning.stages to the config or pass --reference-grid",
                          "tuning.stages");
  }
  if (cfg.folds < 3) throw ValidationError("cross-validation needs at least 3 folds", "folds");
  harness::validate(cfg.train);
  const std::uint64_t seed = run_seed(g, cfg);
  const auto bags = load_bags(a.cohort, g.workers);
  const auto plan = bagio::make_kfold(bagio::patients_of(bags), cfg.folds, seed);
  log::info("tuning " + std::to_string(harness::count_runs(cfg.stages, cfg.folds)) + " training runs");
  const auto result = harness::grid_search(cfg.stages, cfg.train, harness::make_fold_data(plan, bags), seed, g.workers);

  OutputDir out(a.out);
  bagio::write_plan(out / "splits.csv", plan);
  write_text_atomic(out / "tuning_report.csv", harness::tuning_report_csv(result));
  std::ostringstream rank;
  rank << "rank,stage,config_index,mean_val_loss,learning_rate,dropout,l2_weight,attention_dim,patches_per_slide\n";
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const auto& t = result.ranked[i];
    rank << i + 1 << ',' << t.stage << ',' << t.config_index << ',' << format_double(t.mean_val_loss) << ','
         << format_double(t.config.learning_rate) << ',' << format_double(t.config.dropout) << ','
         << format_double(t.config.l2_weight) << ',' << t.config.attention_dim << ',' << t.config.patches_per_slide
         << '\n';
  }
  write_text_atomic(out / "ranking.csv", rank.str());
  const std::string winner = harness::train_config_to_json(result.winner.config);
  write_text_atomic(out / "winner.json", winner);
  out.finish();
  std::cout << "winner (stage " << result.winner.stage << ", config " << result.winner.config_index
            << ", mean val loss " << format_double(result.winner.mean_val_loss) << "):\n"
            << winner;
}

// ---- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string predictions;
  std::string out;
  std::size_t iterations = 100000;
  std::string unit = "slide";
  double threshold = 0.5;
  std::string positive = "effective";
};

void run_eval(const Globals& g, const EvalArgs& a) {
  if (!fs::exists(a.predictions)) throw InputError("predictions file not found: " + a.predictions);
  const auto preds = metrics::read_predictions(a.predictions);
  if (preds.empty()) throw InputError("no predictions in " + a.predictions);
  metrics::BootstrapOptions options;
  options.iterations = a.iterations;
  options.seed = g.seed.value_or(0);
  options.workers = g.workers;
  if (a.unit == "slide") {
    options.unit = metrics::ResampleUnit::slide;
  } else if (a.unit == "patient") {
    options.unit = metrics::ResampleUnit::patient;
  } else {
    throw ValidationError("must be 'slide' or 'patient'", "unit");
  }
  if (!(a.threshold >= 0.0 && a.threshold <= 1.0)) throw ValidationError("must be in [0, 1]", "threshold");
  options.metric_options.threshold = a.threshold;
  try {
    options.metric_options.positive = bagio::parse_label(a.positive);
  } catch (const Error&) {
    throw ValidationError("must be 'effective' or 'invalid'", "positive");
  }
  const auto report = metrics::build_report(preds, options);
  OutputDir out(a.out);
  write_text_atomic(out / "metrics.json", metrics::report_to_json(report));
  write_text_atomic(out / "roc.csv", metrics::roc_to_csv(report.roc));
  out.finish();
  for (auto m : metrics::kAllMetrics) {
    const auto it = report.pooled_bootstrap.find(m);
    std::cout << metrics::to_string(m) << ' ' << opt_str(report.point.at(m));
    if (it != report.pooled_bootstrap.end()) {
      std::cout << " (bootstrap " << format_double(it->second.mean) << " +/- " << format_double(it->second.std) << ')';
    }
    std::cout << '\n';
  }
}

// ---- ensemble ------------------------------------------------------------------

struct EnsembleArgs {
  std::string cohort;
  std::string out;
  std::string config;
  std::optional<std::size_t> members;
  std::string predict;
};

void run_ensemble(const Globals& g, const EnsembleArgs& a) {
  auto cfg = load_config(a.config);
  if (a.members) cfg.ensemble_members = *a.members;
  harness::validate(cfg.train);
  const std::uint64_t seed = run_seed(g, cfg);
  const auto bags = load_bags(a.cohort, g.workers);
  std::vector<bagio::FeatureBag> targets;
  if (!a.predict.empty()) targets = load_bags(a.predict, g.workers);
  const auto ens = harness::train_ensemble(cfg.train, bags, cfg.ensemble_members, seed, g.workers);

  OutputDir out(a.out);
  bagio::write_plan(out / "splits.csv", ens.plan);
  std::ostringstream mcsv;
  mcsv << "member,epochs_run,best_epoch,best_val_loss\n";
  for (std::size_t m = 0; m < ens.members.size(); ++m) {
    const auto& t = ens.members[m];
    mcsv << m << ',' << t.epochs_run << ',' << t.best_epoch << ',' << format_double(t.best_val_loss) << '\n';
    write_model(out, "member" + std::to_string(m), t.params, cfg.train);
  }
  write_text_atomic(out / "members.csv", mcsv.str());
  if (!targets.empty()) {
    harness::BagRefs refs;
    for (const auto& b : targets) refs.push_back(&b);
    metrics::write_predictions(out / "ensemble_predictions.csv", harness::ensemble_predict(ens, refs));
  }
  out.finish();
  std::cout << "trained " << ens.members.size() << " ensemble members\n";
}

// ---- heatmap -------------------------------------------------------------------

struct HeatmapArgs {
  std::string cohort;
  std::string out;
  std::string regions;
  std::string thumbnails;
  std::string train_dir;
  std::string checkpoint;
  std::string normalization = "minmax";
  double p_low = 1.0, p_high = 99.0;
  double alpha = 0.5;
  std::size_t scale = 64;
};

void run_heatmap(const Globals& g, const HeatmapArgs& a) {
  if (a.train_dir.empty() == a.checkpoint.empty()) {
    throw ValidationError("give exactly one of --train-dir or --checkpoint", "model");
  }
  heatmap::HeatmapSpec spec;
  if (a.normalization == "percentile") {
    spec.normalization = heatmap::Normalization::percentile;
  } else if (a.normalization != "minmax") {
    throw ValidationError("must be 'minmax' or 'percentile'", "normalization");
  }
  spec.percentile_low = a.p_low;
  spec.percentile_high = a.p_high;
  spec.alpha = a.alpha;
  spec.scale = a.scale;
  heatmap::validate(spec);

  const auto bags = load_bags(a.cohort, g.workers);
  // Each slide uses the model that never saw it: its test fold's model under
  // --train-dir, else the single checkpoint.
  std::map<int, mil::MilModelParams> models;
  std::map<std::string, int> fold_of;
  if (!a.checkpoint.empty()) {
    if (!fs::exists(a.checkpoint)) throw InputError("checkpoint not found: " + a.checkpoint);
    models[-1] = mil::read_checkpoint(a.checkpoint);
  } else {
    const fs::path dir(a.train_dir);
    if (!fs::exists(dir / "predictions.csv")) throw InputError("no predictions.csv in " + a.train_dir);
    for (const auto& p : metrics::read_predictions(dir / "predictions.csv")) {
      fold_of[p.slide_id] = p.fold;
      if (!models.count(p.fold)) {
        const fs::path ckpt = dir / "models" / ("fold" + std::to_string(p.fold) + ".ckpt");
        if (!fs::exists(ckpt)) throw InputError("checkpoint not found: " + ckpt.string());
        models[p.fold] = mil::read_checkpoint(ckpt);
      }
    }
  }

  OutputDir out(a.out);
  std::vector<std::string> rows(bags.size());
  std::vector<heatmap::AttentionSummary> summaries(bags.size());
  parallel_for(bags.size(), g.workers, [&](std::size_t i) {
    const auto& bag = bags[i];
    const mil::MilModelParams* params = nullptr;
    if (!a.checkpoint.empty()) {
      params = &models.at(-1);
    } else {
      const auto it = fold_of.find(bag.slide_id);
      if (it == fold_of.end()) throw InputError("slide " + bag.slide_id + " has no test fold in predictions.csv");
      params = &models.at(it->second);
    }
    const fs::path manifest_path = fs::path(a.regions) / (bag.slide_id + ".csv");
    if (!fs::exists(manifest_path)) throw InputError("region manifest not found: " + manifest_path.string());
    const auto manifest = preprocess::read_manifest(manifest_path);
    if (manifest.entries.size() != bag.size()) {
      throw DimensionError("slide " + bag.slide_id + ": manifest has " + std::to_string(manifest.entries.size()) +
                           " regions but the bag has " + std::to_string(bag.size()));
    }
    for (std::size_t r = 0; r < bag.size(); ++r) {
      if (manifest.entries[r].x != bag.coords[r].x || manifest.entries[r].y != bag.coords[r].y) {
        throw InputError("slide " + bag.slide_id + ": region " + std::to_string(r) + " differs between manifest and bag");
      }
    }
    const auto fwd = mil::forward_bag(bag.features, *params, nn::DropoutSpec::inference(), nullptr, false);
    preprocess::RgbImage thumb;
    const fs::path thumb_path = fs::path(a.thumbnails) / (bag.slide_id + ".png");
    if (!a.thumbnails.empty() && fs::exists(thumb_path)) {
      thumb = preprocess::read_image(thumb_path);
    } else {
      thumb = synth::layout_thumbnail(manifest, spec.scale);
    }
    preprocess::write_image(out / ("heatmaps/" + bag.slide_id + ".png"),
                            heatmap::render_heatmap(thumb, manifest, fwd.attention, spec));
    write_text_atomic(out / ("attention/" + bag.slide_id + ".csv"), heatmap::attention_csv(manifest, fwd.attention, spec));
    summaries[i] = heatmap::attention_summary(manifest, fwd.attention);
    const auto& s = summaries[i];
    rows[i] = bag.slide_id + ',' + std::to_string(s.tissue_regions) + ',' + std::to_string(s.background_regions) +
              ',' + opt_str(s.tissue_mean) + ',' + opt_str(s.background_mean) + ',' + opt_str(s.score) + ',' +
              (s.confounded() ? "1" : "0") + '\n';
  });
  std::string csv = "slide_id,tissue_regions,background_regions,tissue_mean,background_mean,confounding_score,confounded\n";
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += rows[i];
    flagged += summaries[i].confounded();
  }
  write_text_atomic(out / "attention_summary.csv", csv);
  out.finish();
  std::cout << "rendered " << bags.size() << " heatmaps; " << flagged << " slides attend more to background\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-slide MIL toolkit: segmentation, tiling, attention MIL training, evaluation, heatmaps"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed for every random stream (default: config train.seed, else 0)");
  app.add_option("--workers", g.workers, "Worker threads; results do not depend on this")->check(CLI::Range(1u, 1024u));
  app.add_flag("-v,--verbose", g.verbose, "More logging (repeat for debug)");
  app.add_flag("-q,--quiet", g.quiet, "Only errors");

  SegmentArgs seg;
  auto* segment = app.add_subcommand("segment", "Otsu tissue masks and thumbnails for slide images");
  auto add_segment_opts = [](CLI::App* cmd, SegmentArgs& s) {
    cmd->add_option("inputs", s.inputs, "Image files or directories (.png, .ppm)")->required();
    cmd->add_option("-o,--out", s.out, "Output directory")->required();
    cmd->add_option("--channel", s.channel, "saturation or luminance");
    cmd->add_option("--downsample", s.downsample, "Box-downsampling factor before thresholding");
    cmd->add_flag("--no-smooth", s.no_smooth, "Skip the 3x3 median filter on the mask");
    cmd->add_option("--thumbnail-divisor", s.thumbnail, "Thumbnail scale (slide pixels per thumbnail pixel)");
  };
  add_segment_opts(segment, seg);

  TileArgs tile_args;
  auto* tile = app.add_subcommand("tile", "Segment and list non-overlapping tissue regions");
  add_segment_opts(tile, tile_args.segment);
  tile->add_option("--region-size", tile_args.region_size, "Region edge in slide pixels");
  tile->add_option("--min-tissue", tile_args.min_tissue, "Minimum tissue fraction to keep a region");
  tile->add_flag("--pad-small", tile_args.pad_small, "Treat a slide smaller than one region as a single region");

  SynthArgs syn;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic cohort with planted signal");
  synth_cmd->add_option("-o,--out", syn.out, "Output directory")->required();
  synth_cmd->add_option("--patients", syn.spec.patients);
  synth_cmd->add_option("--effective", syn.spec.effective_patients, "Patients in the effective class");
  synth_cmd->add_option("--slides-min", syn.slides_min);
  synth_cmd->add_option("--slides-max", syn.slides_max);
  synth_cmd->add_option("--regions-min", syn.regions_min);
  synth_cmd->add_option("--regions-max", syn.regions_max);
  synth_cmd->add_option("--dim", syn.spec.dim, "Feature dimension");
  synth_cmd->add_option("--signal", syn.spec.signal_effect, "Signal effect size (standard deviations)");
  synth_cmd->add_option("--signal-fraction", syn.spec.signal_fraction, "Fraction of tissue regions carrying signal");
  synth_cmd->add_flag("--confounder", syn.confounder, "Add label-correlated background regions");
  synth_cmd->add_option("--background-min", syn.conf.regions.min);
  synth_cmd->add_option("--background-max", syn.conf.regions.max);
  synth_cmd->add_option("--background-offset", syn.conf.offset);
  synth_cmd->add_option("--background-effect", syn.conf.effect);
  synth_cmd->add_option("--bayes-samples", syn.spec.bayes_samples, "Monte Carlo slides per class for the Bayes AUC");
  synth_cmd->add_option("--thumbnail-divisor", syn.thumbnail);

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Patient-level k-fold cross-validation training");
  train->add_option("--cohort", tr.cohort, "Cohort manifest CSV")->required();
  train->add_option("-o,--out", tr.out, "Output directory")->required();
  train->add_option("--config", tr.config, "Experiment config JSON");
  train->add_option("--folds", tr.folds);

  TuneArgs tu;
  auto* tune = app.add_subcommand("tune", "Staged hyperparameter grid search over cross-validation folds");
  tune->add_option("--cohort", tu.cohort, "Cohort manifest CSV")->required();
  tune->add_option("-o,--out", tu.out, "Output directory")->required();
  tune->add_option("--config", tu.config, "Experiment config JSON with tuning.stages");
  tune->add_flag("--reference-grid", tu.reference_grid, "Use the built-in three-stage reference grid");
  tune->add_option("--folds", tu.folds);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Metrics, bootstrap statistics and ROC for a predictions CSV");
  eval->add_option("--predictions", ev.predictions)->required();
  eval->add_option("-o,--out", ev.out, "Output directory")->required();
  eval->add_option("--iterations", ev.iterations, "Bootstrap resamples");
  eval->add_option("--unit", ev.unit, "Bootstrap resampling unit: slide or patient");
  eval->add_option("--threshold", ev.threshold, "Probability threshold for predicting effective");
  eval->add_option("--positive", ev.positive, "Positive class for F1: effective or invalid");

  EnsembleArgs en;
  auto* ensemble = app.add_subcommand("ensemble", "Train a k-member ensemble on rotating train/val splits");
  ensemble->add_option("--cohort", en.cohort, "Cohort manifest CSV")->required();
  ensemble->add_option("-o,--out", en.out, "Output directory")->required();
  ensemble->add_option("--config", en.config, "Experiment config JSON");
  ensemble->add_option("--members", en.members);
  ensemble->add_option("--predict", en.predict, "Cohort manifest to score with the ensemble mean");

  HeatmapArgs hm;
  auto* heat = app.add_subcommand("heatmap", "Attention heatmaps and background-attention audit");
  heat->add_option("--cohort", hm.cohort, "Cohort manifest CSV")->required();
  heat->add_option("-o,--out", hm.out, "Output directory")->required();
  heat->add_option("--regions", hm.regions, "Directory of <slide_id>.csv region manifests")->required();
  heat->add_option("--thumbnails", hm.thumbnails, "Directory of <slide_id>.png thumbnails");
  heat->add_option("--train-dir", hm.train_dir, "Output of `train`; each slide uses its test-fold model");
  heat->add_option("--checkpoint", hm.checkpoint, "A single model checkpoint for every slide");
  heat->add_option("--normalization", hm.normalization, "minmax or percentile");
  heat->add_option("--p-low", hm.p_low);
  heat->add_option("--p-high", hm.p_high);
  heat->add_option("--alpha", hm.alpha);
  heat->add_option("--scale", hm.scale, "Slide pixels per thumbnail pixel");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  log::set_level(g.quiet ? log::Level::error
                 : g.verbose >= 2 ? log::Level::debug
                 : g.verbose == 1 ? log::Level::info
                                  : log::Level::warn);
  try {
    if (*segment) run_segment(g, seg);
    if (*tile) run_tile(g, tile_args);
    if (*synth_cmd) run_synth(g, syn);
    if (*train) run_train(g, tr);
    if (*tune) run_tune(g, tu);
    if (*eval) run_eval(g, ev);
    if (*ensemble) run_ensemble(g, en);
    if (*heat) run_heatmap(g, hm);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
