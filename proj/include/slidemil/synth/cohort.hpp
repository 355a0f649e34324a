#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slidemil/bagio/bag.hpp"
#include "slidemil/bagio/cohort.hpp"
#include "slidemil/preprocess/image.hpp"
#include "slidemil/preprocess/tiling.hpp"

namespace slidemil::synth {

struct Range {
  std::size_t min = 0;
  std::size_t max = 0;
};

/// Label-correlated "background" regions: low tissue fraction, a shared
/// offset along one direction plus a ±shift/2 label effect along another.
struct ConfounderSpec {
  Range regions{8, 16};
  double offset = 5.0;  // distance of the background mean from the tissue mean
  double effect = 5.0;  // separation of the class means along the label direction
};

struct CohortSpec {
  std::size_t patients = 78;
  std::size_t effective_patients = 53;
  Range slides_per_patient{1, 6};
  std::size_t dim = 64;
  Range regions_per_slide{13, 166};
  double signal_effect = 5.0;     // shift of signal regions along the signal direction
  double signal_fraction = 0.3;   // of tissue regions, in effective slides only
  std::optional<ConfounderSpec> confounder;
  std::int64_t region_size = 4096;
  std::uint64_t seed = 0;
  std::size_t bayes_samples = 2000;  // Monte Carlo slides per class for the Bayes AUC
};

void validate(const CohortSpec& spec);

struct SlideTruth {
  std::string slide_id;
  std::vector<std::size_t> signal;      // region indices, ascending
  std::vector<std::size_t> background;  // region indices, ascending; disjoint from signal
};

struct GroundTruth {
  std::vector<SlideTruth> slides;  // same order as the bags
  double bayes_auc = 0.5;          // slide-level, estimated by Monte Carlo
};

struct SyntheticCohort {
  std::vector<bagio::FeatureBag> bags;
  std::vector<preprocess::RegionManifest> regions;  // per slide, aligned with the bag rows
  GroundTruth truth;
};

/// Seeded generator. Baseline regions are standard Gaussian; in effective
/// slides a fraction of the tissue regions is shifted along a fixed unit
/// direction. Features are rounded to float so the cohort survives a round
/// trip through .fbag files unchanged.
SyntheticCohort generate_cohort(const CohortSpec& spec, unsigned workers = 1);

/// Number of signal regions in an effective slide with `tissue` tissue regions.
std::size_t signal_count(const CohortSpec& spec, std::size_t tissue);

/// Slide-level AUC of the exact likelihood-ratio classifier, estimated from
/// `spec.bayes_samples` simulated slides per class.
double bayes_auc(const CohortSpec& spec);

std::string ground_truth_to_json(const GroundTruth& truth);

/// Schematic thumbnail of a synthetic slide: each region cell is shaded from
/// white toward pink by its tissue fraction.
preprocess::RgbImage layout_thumbnail(const preprocess::RegionManifest& manifest, std::size_t scale = 64);

}  // namespace slidemil::synth
