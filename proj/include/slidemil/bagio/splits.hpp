#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slidemil/bagio/bag.hpp"

namespace slidemil::bagio {

enum class SplitScheme { kfold, train_val };

/// Patient-level partition. For kfold the part index is the fold; for
/// train_val it is 0 = train, 1 = val.
struct SplitPlan {
  SplitScheme scheme = SplitScheme::kfold;
  std::size_t parts = 5;
  double val_fraction = 0.25;  // train_val only
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> assignment;  // patient_id → part

  std::size_t part_of(const std::string& patient_id) const;
  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct PatientLabel {
  std::string patient_id;
  Label label = Label::invalid;
};

/// Distinct patients of `bags` with their (per-patient) label. Throws if a
/// patient's slides disagree or a bag is unlabeled.
std::vector<PatientLabel> patients_of(const std::vector<FeatureBag>& bags);

/// Label-stratified k-fold partition of patients. Deterministic in `seed`.
/// Needs ≥ k patients per class.
SplitPlan make_kfold(const std::vector<PatientLabel>& patients, std::size_t k, std::uint64_t seed);

/// Label-stratified single train/val split with roughly `val_fraction` of each
/// class in val (at least one patient of each class on each side).
SplitPlan make_train_val(const std::vector<PatientLabel>& patients, double val_fraction, std::uint64_t seed);

/// Bag indices playing each role in one run.
struct FoldRoles {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Cross-validation roles for `fold`: that fold is test, the next fold
/// (cyclically) is validation, the rest train. Needs k ≥ 3.
FoldRoles cv_roles(const SplitPlan& plan, const std::vector<FeatureBag>& bags, std::size_t fold);

/// Ensemble member roles: fold `member` is validation, the rest train, no test.
FoldRoles holdout_roles(const SplitPlan& plan, const std::vector<FeatureBag>& bags, std::size_t member);

struct SplitAudit {
  std::vector<std::string> violations;
  bool ok() const noexcept { return violations.empty(); }
};

/// Exhaustive leakage and balance audit of a k-fold plan against the bags it
/// partitions: every patient assigned once; within each fold's roles no
/// patient appears in two roles; each patient is test in exactly one fold;
/// fold sizes and per-class fold counts differ by at most one.
SplitAudit audit_kfold(const SplitPlan& plan, const std::vector<FeatureBag>& bags);

/// CSV columns: patient_id,fold.
std::string plan_to_csv(const SplitPlan& plan);
void write_plan(const std::filesystem::path& path, const SplitPlan& plan);

}  // namespace slidemil::bagio
