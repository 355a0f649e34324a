#include "slidemil/bagio/cohort.hpp"

#include <map>
#include <set>
#include <sstream>

#include "slidemil/common/files.hpp"
#include "slidemil/common/parallel.hpp"

namespace slidemil::bagio {

std::array<std::size_t, 2> CohortManifest::slide_counts() const {
  std::array<std::size_t, 2> out{};
  for (const auto& e : entries) ++out[static_cast<std::size_t>(e.label)];
  return out;
}

std::array<std::size_t, 2> CohortManifest::patient_counts() const {
  std::map<std::string, Label> patients;
  for (const auto& e : entries) patients.emplace(e.patient_id, e.label);
  std::array<std::size_t, 2> out{};
  for (const auto& [id, label] : patients) ++out[static_cast<std::size_t>(label)];
  return out;
}

void validate(const CohortManifest& manifest) {
  std::set<std::string> slides;
  std::map<std::string, Label> patients;
  for (const auto& e : manifest.entries) {
    if (e.slide_id.empty() || e.patient_id.empty()) throw InputError("cohort row has an empty id");
    if (!slides.insert(e.slide_id).second) throw InputError("duplicate slide_id '" + e.slide_id + "'");
    auto [it, inserted] = patients.emplace(e.patient_id, e.label);
    if (!inserted && it->second != e.label)
      throw InputError("patient '" + e.patient_id + "' has slides with different labels");
  }
}

std::string cohort_to_csv(const CohortManifest& manifest) {
  std::ostringstream out;
  out << "slide_id,patient_id,label,bag_path\n";
  for (const auto& e : manifest.entries)
    out << e.slide_id << ',' << e.patient_id << ',' << to_string(e.label) << ',' << e.bag_path.generic_string()
        << '\n';
  return out.str();
}

CohortManifest cohort_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) != std::vector<std::string>{"slide_id", "patient_id", "label", "bag_path"})
    throw InputError("cohort manifest: header must be slide_id,patient_id,label,bag_path");
  CohortManifest m;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != 4) throw InputError("cohort manifest: expected 4 columns in '" + line + "'");
    m.entries.push_back({f[0], f[1], parse_label(f[2]), f[3]});
  }
  validate(m);
  return m;
}

void write_cohort(const std::filesystem::path& path, const CohortManifest& manifest) {
  validate(manifest);
  write_text_atomic(path, cohort_to_csv(manifest));
}

CohortManifest read_cohort(const std::filesystem::path& path) { return cohort_from_csv(read_text(path)); }

std::vector<FeatureBag> load_cohort_bags(const std::filesystem::path& path, unsigned workers) {
  const CohortManifest m = read_cohort(path);
  const auto base = path.parent_path();
  std::vector<FeatureBag> bags(m.entries.size());
  parallel_for(bags.size(), workers, [&](std::size_t i) {
    const auto& e = m.entries[i];
    const auto file = e.bag_path.is_absolute() ? e.bag_path : base / e.bag_path;
    bags[i] = read_bag(file);
    if (bags[i].slide_id != e.slide_id || bags[i].patient_id != e.patient_id)
      throw InputError(file.string() + ": bag ids do not match cohort row '" + e.slide_id + "'");
    if (bags[i].label && *bags[i].label != e.label)
      throw InputError(file.string() + ": bag label does not match cohort row");
    bags[i].label = e.label;
  });
  return bags;
}

CohortManifest manifest_for(const std::vector<FeatureBag>& bags, const std::filesystem::path& bag_dir) {
  CohortManifest m;
  for (const auto& b : bags) {
    if (!b.label) throw InputError("bag '" + b.slide_id + "' is unlabeled");
    m.entries.push_back({b.slide_id, b.patient_id, *b.label, bag_dir / (b.slide_id + ".fbag")});
  }
  validate(m);
  return m;
}

}  // namespace slidemil::bagio
