#include "slidemil/bagio/splits.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include "slidemil/common/files.hpp"
#include "slidemil/common/rng.hpp"

namespace slidemil::bagio {

std::size_t SplitPlan::part_of(const std::string& patient_id) const {
  auto it = assignment.find(patient_id);
  if (it == assignment.end()) throw ValidationError("patient '" + patient_id + "' is not in the split plan");
  return it->second;
}

std::vector<PatientLabel> patients_of(const std::vector<FeatureBag>& bags) {
  std::map<std::string, Label> seen;
  for (const auto& b : bags) {
    if (!b.label) throw InputError("bag '" + b.slide_id + "' is unlabeled");
    auto [it, inserted] = seen.emplace(b.patient_id, *b.label);
    if (!inserted && it->second != *b.label)
      throw InputError("patient '" + b.patient_id + "' has slides with different labels");
  }
  std::vector<PatientLabel> out;
  for (const auto& [id, label] : seen) out.push_back({id, label});
  return out;
}

namespace {

/// Patient ids per class, sorted then shuffled with a class-specific stream.
std::array<std::vector<std::string>, 2> shuffled_by_class(const std::vector<PatientLabel>& patients,
                                                          std::uint64_t seed) {
  std::array<std::vector<std::string>, 2> groups;
  std::set<std::string> ids;
  for (const auto& p : patients) {
    if (!ids.insert(p.patient_id).second) throw InputError("duplicate patient '" + p.patient_id + "'");
    groups[static_cast<std::size_t>(p.label)].push_back(p.patient_id);
  }
  for (std::size_t c = 0; c < 2; ++c) {
    std::sort(groups[c].begin(), groups[c].end());
    Rng rng = make_rng(seed, {tag("split"), c});
    std::shuffle(groups[c].begin(), groups[c].end(), rng);
  }
  return groups;
}

}  // namespace

SplitPlan make_kfold(const std::vector<PatientLabel>& patients, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("must be >= 2", "folds");
  auto groups = shuffled_by_class(patients, seed);
  for (std::size_t c = 0; c < 2; ++c)
    if (groups[c].size() < k)
      throw ValidationError("class '" + to_string(static_cast<Label>(c)) + "' has " + std::to_string(groups[c].size()) +
                                " patients; " + std::to_string(k) + "-fold split needs at least " + std::to_string(k),
                            "folds");

  SplitPlan plan;
  plan.scheme = SplitScheme::kfold;
  plan.parts = k;
  plan.seed = seed;
  // Dealing both classes round-robin from one running counter keeps fold
  // sizes within one of each other overall and within each class.
  std::size_t next = 0;
  for (const auto& group : groups)
    for (const auto& id : group) plan.assignment[id] = next++ % k;
  return plan;
}

SplitPlan make_train_val(const std::vector<PatientLabel>& patients, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ValidationError("must lie in (0, 1)", "val_fraction");
  auto groups = shuffled_by_class(patients, seed);
  SplitPlan plan;
  plan.scheme = SplitScheme::train_val;
  plan.parts = 2;
  plan.val_fraction = val_fraction;
  plan.seed = seed;
  for (std::size_t c = 0; c < 2; ++c) {
    const std::size_t n = groups[c].size();
    if (n < 2)
      throw ValidationError("class '" + to_string(static_cast<Label>(c)) + "' needs >= 2 patients for a train/val split");
    const auto n_val =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n))), 1, n - 1);
    for (std::size_t i = 0; i < n; ++i) plan.assignment[groups[c][i]] = i < n_val ? 1 : 0;
  }
  return plan;
}

FoldRoles cv_roles(const SplitPlan& plan, const std::vector<FeatureBag>& bags, std::size_t fold) {
  if (plan.scheme != SplitScheme::kfold) throw ValidationError("cross-validation needs a k-fold plan");
  if (plan.parts < 3) throw ValidationError("cross-validation with separate val and test folds needs k >= 3", "folds");
  if (fold >= plan.parts) throw ValidationError("fold index out of range");
  const std::size_t val_fold = (fold + 1) % plan.parts;
  FoldRoles roles;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const std::size_t part = plan.part_of(bags[i].patient_id);
    if (part == fold)
      roles.test.push_back(i);
    else if (part == val_fold)
      roles.val.push_back(i);
    else
      roles.train.push_back(i);
  }
  return roles;
}

FoldRoles holdout_roles(const SplitPlan& plan, const std::vector<FeatureBag>& bags, std::size_t member) {
  if (plan.scheme != SplitScheme::kfold) throw ValidationError("ensemble roles need a k-fold plan");
  if (member >= plan.parts) throw ValidationError("ensemble member index out of range");
  FoldRoles roles;
  for (std::size_t i = 0; i < bags.size(); ++i)
    (plan.part_of(bags[i].patient_id) == member ? roles.val : roles.train).push_back(i);
  return roles;
}

SplitAudit audit_kfold(const SplitPlan& plan, const std::vector<FeatureBag>& bags) {
  SplitAudit audit;
  auto fail = [&](std::string msg) { audit.violations.push_back(std::move(msg)); };

  std::map<std::string, Label> patients;
  for (const auto& b : bags) {
    if (!plan.assignment.contains(b.patient_id)) fail("patient '" + b.patient_id + "' has no fold");
    if (b.label) patients.emplace(b.patient_id, *b.label);
  }
  for (const auto& [id, part] : plan.assignment)
    if (part >= plan.parts) fail("patient '" + id + "' assigned to out-of-range fold");
  if (!audit.ok()) return audit;

  std::map<std::string, std::size_t> times_test;
  for (std::size_t f = 0; f < plan.parts; ++f) {
    const FoldRoles roles = plan.parts >= 3 ? cv_roles(plan, bags, f) : holdout_roles(plan, bags, f);
    std::map<std::string, std::set<int>> roles_of;
    for (auto i : roles.train) roles_of[bags[i].patient_id].insert(0);
    for (auto i : roles.val) roles_of[bags[i].patient_id].insert(1);
    for (auto i : roles.test) roles_of[bags[i].patient_id].insert(2);
    for (const auto& [id, r] : roles_of)
      if (r.size() != 1) fail("fold " + std::to_string(f) + ": patient '" + id + "' spans roles");
    std::set<std::string> tested;
    for (auto i : (plan.parts >= 3 ? roles.test : roles.val)) tested.insert(bags[i].patient_id);
    for (const auto& id : tested) ++times_test[id];
  }
  for (const auto& [id, label] : patients)
    if (times_test[id] != 1) fail("patient '" + id + "' is held out " + std::to_string(times_test[id]) + " times");

  std::vector<std::size_t> sizes(plan.parts);
  std::vector<std::array<std::size_t, 2>> per_class(plan.parts);
  for (const auto& [id, label] : patients) {
    const std::size_t part = plan.part_of(id);
    ++sizes[part];
    ++per_class[part][static_cast<std::size_t>(label)];
  }
  auto spread = [](auto first, auto last) { return *std::max_element(first, last) - *std::min_element(first, last); };
  if (spread(sizes.begin(), sizes.end()) > 1) fail("fold sizes differ by more than one patient");
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<std::size_t> counts;
    for (const auto& pc : per_class) counts.push_back(pc[c]);
    if (spread(counts.begin(), counts.end()) > 1) fail("class " + std::to_string(c) + " is unevenly spread over folds");
  }
  return audit;
}

std::string plan_to_csv(const SplitPlan& plan) {
  std::ostringstream out;
  out << "patient_id,fold\n";
  for (const auto& [id, part] : plan.assignment) out << id << ',' << part << '\n';
  return out.str();
}

void write_plan(const std::filesystem::path& path, const SplitPlan& plan) {
  write_text_atomic(path, plan_to_csv(plan));
}

}  // namespace slidemil::bagio
