#include "slidemil/synth/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "slidemil/common/error.hpp"
#include "slidemil/common/parallel.hpp"
#include "slidemil/common/rng.hpp"
#include "slidemil/metrics/metrics.hpp"

namespace slidemil::synth {

namespace {

void check_range(const Range& r, std::size_t lo, std::size_t hi, const std::string& key) {
  if (r.min < lo || r.max > hi || r.min > r.max) {
    throw ValidationError("range must satisfy " + std::to_string(lo) + " <= min <= max <= " + std::to_string(hi), key);
  }
}

std::size_t uniform_count(Rng& rng, const Range& r) {
  return std::uniform_int_distribution<std::size_t>(r.min, r.max)(rng);
}

using Direction = std::vector<double>;

Direction random_unit(Rng& rng, std::size_t dim, const std::vector<Direction>& orthogonal_to) {
  std::normal_distribution<double> g;
  for (;;) {
    Direction d(dim);
    for (double& v : d) v = g(rng);
    for (const auto& o : orthogonal_to) {
      const double dot = std::inner_product(d.begin(), d.end(), o.begin(), 0.0);
      for (std::size_t i = 0; i < dim; ++i) d[i] -= dot * o[i];
    }
    const double norm = std::sqrt(std::inner_product(d.begin(), d.end(), d.begin(), 0.0));
    if (norm > 1e-6) {
      for (double& v : d) v /= norm;
      return d;
    }
  }
}

struct Directions {
  Direction signal, background, label;
};

Directions directions(const CohortSpec& spec) {
  Rng rng = make_rng(spec.seed, {tag("directions")});
  Directions d;
  d.signal = random_unit(rng, spec.dim, {});
  if (spec.confounder) {
    // With D < 3 the three directions cannot all be orthogonal; reuse freely.
    if (spec.dim >= 3) {
      d.background = random_unit(rng, spec.dim, {d.signal});
      d.label = random_unit(rng, spec.dim, {d.signal, d.background});
    } else {
      d.background = d.signal;
      d.label = d.signal;
    }
  }
  return d;
}

struct SlidePlan {
  std::string slide_id;
  std::string patient_id;
  bagio::Label label;
  std::size_t index;  // global slide index
};

std::vector<std::size_t> sorted_sample(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(n), out;
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

std::string numbered(char prefix, std::size_t i, int width) {
  std::string s = std::to_string(i);
  return std::string(1, prefix) + std::string(width > static_cast<int>(s.size()) ? width - s.size() : 0, '0') + s;
}

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

}  // namespace

void validate(const CohortSpec& spec) {
  if (spec.patients == 0) throw ValidationError("need at least one patient", "patients");
  if (spec.effective_patients > spec.patients) {
    throw ValidationError("cannot exceed the number of patients", "effective_patients");
  }
  if (spec.dim == 0) throw ValidationError("must be positive", "dim");
  check_range(spec.slides_per_patient, 1, 1000, "slides_per_patient");
  check_range(spec.regions_per_slide, 1, 10000, "regions_per_slide");
  if (!(spec.signal_effect >= 0.0) || !std::isfinite(spec.signal_effect)) {
    throw ValidationError("must be finite and >= 0", "signal_effect");
  }
  if (!(spec.signal_fraction >= 0.0 && spec.signal_fraction <= 1.0)) {
    throw ValidationError("must be in [0, 1]", "signal_fraction");
  }
  if (spec.region_size <= 0) throw ValidationError("must be positive", "region_size");
  if (spec.confounder) {
    const auto& c = *spec.confounder;
    check_range(c.regions, 0, 10000, "confounder.regions");
    if (c.regions.max >= spec.regions_per_slide.min) {
      throw ValidationError("background regions must leave at least one tissue region per slide", "confounder.regions");
    }
    if (!(c.offset >= 0.0) || !(c.effect >= 0.0) || !std::isfinite(c.offset) || !std::isfinite(c.effect)) {
      throw ValidationError("effect sizes must be finite and >= 0", "confounder");
    }
  }
}

std::size_t signal_count(const CohortSpec& spec, std::size_t tissue) {
  if (spec.signal_fraction <= 0.0 || tissue == 0) return 0;
  const auto k = static_cast<std::size_t>(std::lround(spec.signal_fraction * static_cast<double>(tissue)));
  return std::clamp<std::size_t>(k, 1, tissue);
}

SyntheticCohort generate_cohort(const CohortSpec& spec, unsigned workers) {
  validate(spec);
  const Directions dirs = directions(spec);

  // Which patients are effective, then how many slides each has.
  std::vector<std::size_t> order(spec.patients);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng label_rng = make_rng(spec.seed, {tag("labels")});
  std::shuffle(order.begin(), order.end(), label_rng);
  std::vector<bagio::Label> patient_label(spec.patients, bagio::Label::invalid);
  for (std::size_t i = 0; i < spec.effective_patients; ++i) patient_label[order[i]] = bagio::Label::effective;

  std::vector<SlidePlan> plans;
  const int pw = spec.patients >= 1000 ? 5 : 3;
  for (std::size_t p = 0; p < spec.patients; ++p) {
    Rng rng = make_rng(spec.seed, {tag("patient"), p});
    const std::size_t slides = uniform_count(rng, spec.slides_per_patient);
    for (std::size_t s = 0; s < slides; ++s) {
      plans.push_back({{}, numbered('P', p, pw), patient_label[p], plans.size()});
    }
  }
  for (auto& p : plans) p.slide_id = numbered('S', p.index, 4);

  SyntheticCohort out;
  out.bags.resize(plans.size());
  out.regions.resize(plans.size());
  out.truth.slides.resize(plans.size());
  parallel_for(plans.size(), workers, [&](std::size_t i) {
    const SlidePlan& plan = plans[i];
    Rng rng = make_rng(spec.seed, {tag("slide"), plan.index});
    const std::size_t n = uniform_count(rng, spec.regions_per_slide);
    const std::size_t n_bg = spec.confounder ? uniform_count(rng, spec.confounder->regions) : 0;

    SlideTruth& truth = out.truth.slides[i];
    truth.slide_id = plan.slide_id;
    truth.background = sorted_sample(n, n_bg, rng);
    std::vector<std::size_t> tissue;
    for (std::size_t r = 0, b = 0; r < n; ++r) {
      if (b < truth.background.size() && truth.background[b] == r) {
        ++b;
      } else {
        tissue.push_back(r);
      }
    }
    const bool effective = plan.label == bagio::Label::effective;
    if (effective) {
      for (std::size_t j : sorted_sample(tissue.size(), signal_count(spec, tissue.size()), rng)) {
        truth.signal.push_back(tissue[j]);
      }
    }

    bagio::FeatureBag& bag = out.bags[i];
    bag.slide_id = plan.slide_id;
    bag.patient_id = plan.patient_id;
    bag.label = plan.label;
    bag.features = nn::Matrix(n, spec.dim);
    std::normal_distribution<double> g;
    for (double& v : bag.features.values()) v = g(rng);
    for (std::size_t r : truth.signal) {
      auto row = bag.features.row(r);
      for (std::size_t d = 0; d < spec.dim; ++d) row[d] += spec.signal_effect * dirs.signal[d];
    }
    if (spec.confounder) {
      const double shift = (effective ? 0.5 : -0.5) * spec.confounder->effect;
      for (std::size_t r : truth.background) {
        auto row = bag.features.row(r);
        for (std::size_t d = 0; d < spec.dim; ++d) {
          row[d] += spec.confounder->offset * dirs.background[d] + shift * dirs.label[d];
        }
      }
    }
    for (double& v : bag.features.values()) v = static_cast<double>(static_cast<float>(v));

    // Regions laid out on a near-square grid of region cells.
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    preprocess::RegionManifest& manifest = out.regions[i];
    manifest.slide_id = plan.slide_id;
    manifest.region_size = spec.region_size;
    std::uniform_real_distribution<double> bg_frac(0.15, 0.45), tissue_frac(0.6, 1.0);
    for (std::size_t r = 0, b = 0; r < n; ++r) {
      const bool is_bg = b < truth.background.size() && truth.background[b] == r;
      if (is_bg) ++b;
      const std::int64_t x = static_cast<std::int64_t>(r % cols) * spec.region_size;
      const std::int64_t y = static_cast<std::int64_t>(r / cols) * spec.region_size;
      bag.coords.push_back({x, y, spec.region_size});
      manifest.entries.push_back({x, y, is_bg ? bg_frac(rng) : tissue_frac(rng)});
    }
  });
  out.truth.bayes_auc = bayes_auc(spec);
  return out;
}

double bayes_auc(const CohortSpec& spec) {
  validate(spec);
  if (spec.bayes_samples == 0) throw ValidationError("must be positive", "bayes_samples");
  const double mu = spec.signal_effect;
  const double beta = spec.confounder ? spec.confounder->effect : 0.0;
  const bool constant_dims = spec.dim < 3 && spec.confounder;
  if (constant_dims) {
    // Directions coincide at tiny D and the projections are no longer
    // independent; the estimate below would be wrong.
    return std::numeric_limits<double>::quiet_NaN();
  }

  // The likelihood ratio only depends on each region's projection onto the
  // signal direction (tissue regions) or the label direction (background
  // regions); those projections are unit Gaussians.
  auto log_lr = [&](Rng& rng, bool effective) {
    std::normal_distribution<double> g;
    const std::size_t n = uniform_count(rng, spec.regions_per_slide);
    const std::size_t n_bg = spec.confounder ? uniform_count(rng, spec.confounder->regions) : 0;
    const std::size_t n_t = n - n_bg;
    const std::size_t k = signal_count(spec, n_t);
    double score = 0.0;
    for (std::size_t i = 0; i < n_bg; ++i) score += beta * (g(rng) + (effective ? 0.5 : -0.5) * beta);
    if (k > 0 && mu > 0.0) {
      // log of e_k(r_1..r_n) / C(n, k), r_i = exp(mu s_i - mu^2/2), via the
      // elementary symmetric polynomial recurrence in log space.
      std::vector<double> e(k + 1, -std::numeric_limits<double>::infinity());
      e[0] = 0.0;
      for (std::size_t i = 0; i < n_t; ++i) {
        const double s = g(rng) + (effective && i < k ? mu : 0.0);
        const double lr = mu * s - 0.5 * mu * mu;
        for (std::size_t j = std::min(i + 1, k); j >= 1; --j) e[j] = log_add(e[j], e[j - 1] + lr);
      }
      score += e[k] - (std::lgamma(n_t + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n_t - k + 1.0));
    }
    return score;
  };

  metrics::PredictionSet sims;
  sims.reserve(2 * spec.bayes_samples);
  Rng rng = make_rng(spec.seed, {tag("bayes")});
  for (std::size_t i = 0; i < 2 * spec.bayes_samples; ++i) {
    const bool effective = i % 2 == 0;
    metrics::Prediction p;
    p.truth = effective ? bagio::Label::effective : bagio::Label::invalid;
    p.probability = log_lr(rng, effective);
    sims.push_back(p);
  }
  return metrics::auc(sims);
}

std::string ground_truth_to_json(const GroundTruth& truth) {
  nlohmann::ordered_json j;
  j["bayes_auc"] = std::isnan(truth.bayes_auc) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(truth.bayes_auc);
  auto& slides = j["slides"] = nlohmann::ordered_json::array();
  for (const auto& s : truth.slides) {
    nlohmann::ordered_json o;
    o["slide_id"] = s.slide_id;
    o["signal"] = s.signal;
    o["background"] = s.background;
    slides.push_back(std::move(o));
  }
  return j.dump(2) + "\n";
}

preprocess::RgbImage layout_thumbnail(const preprocess::RegionManifest& manifest, std::size_t scale) {
  if (scale == 0) throw ValidationError("must be positive", "scale");
  std::int64_t w = 0, h = 0;
  for (const auto& e : manifest.entries) {
    w = std::max(w, e.x + manifest.region_size);
    h = std::max(h, e.y + manifest.region_size);
  }
  const auto s = static_cast<std::int64_t>(scale);
  preprocess::RgbImage img(static_cast<std::size_t>((w + s - 1) / s), static_cast<std::size_t>((h + s - 1) / s));
  const preprocess::Rgb pink{214, 130, 178};
  for (const auto& e : manifest.entries) {
    const double f = std::clamp(e.tissue_fraction, 0.0, 1.0);
    auto mix = [f](std::uint8_t a) { return static_cast<std::uint8_t>(std::lround(255.0 + f * (a - 255.0))); };
    const preprocess::Rgb c{mix(pink.r), mix(pink.g), mix(pink.b)};
    for (std::int64_t y = e.y / s; y < std::min<std::int64_t>(img.height(), (e.y + manifest.region_size) / s); ++y) {
      for (std::int64_t x = e.x / s; x < std::min<std::int64_t>(img.width(), (e.x + manifest.region_size) / s); ++x) {
        img.set(x, y, c);
      }
    }
  }
  return img;
}

}  // namespace slidemil::synth
