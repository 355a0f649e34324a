#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "slidemil/bagio/bag.hpp"

namespace slidemil::bagio {

struct CohortEntry {
  std::string slide_id;
  std::string patient_id;
  Label label = Label::invalid;
  std::filesystem::path bag_path;  // relative paths resolve against the manifest directory
  friend bool operator==(const CohortEntry&, const CohortEntry&) = default;
};

struct CohortManifest {
  std::vector<CohortEntry> entries;

  /// Slides per class, indexed by Label.
  std::array<std::size_t, 2> slide_counts() const;
  /// Patients per class, indexed by Label.
  std::array<std::size_t, 2> patient_counts() const;
};

/// Unique slide ids; all slides of a patient share one label.
void validate(const CohortManifest& manifest);

/// CSV columns: slide_id,patient_id,label,bag_path.
std::string cohort_to_csv(const CohortManifest& manifest);
CohortManifest cohort_from_csv(const std::string& text);
void write_cohort(const std::filesystem::path& path, const CohortManifest& manifest);
CohortManifest read_cohort(const std::filesystem::path& path);

/// Reads every bag listed in the manifest at `path`, in manifest order, and
/// checks each bag's ids and label against its manifest row.
std::vector<FeatureBag> load_cohort_bags(const std::filesystem::path& path, unsigned workers = 1);

/// Manifest describing `bags`, with bag files named <slide_id>.fbag under `bag_dir`.
CohortManifest manifest_for(const std::vector<FeatureBag>& bags, const std::filesystem::path& bag_dir);

}  // namespace slidemil::bagio
