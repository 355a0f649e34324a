#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "../support/oracles.hpp"
#include "../support/predictions.hpp"
#include "slidemil/common/error.hpp"
#include "slidemil/common/log.hpp"
#include "slidemil/metrics/bootstrap.hpp"
#include "slidemil/metrics/report.hpp"

using namespace slidemil;
using namespace slidemil::metrics;
using bagio::Label;

namespace {

PredictionSet make(std::initializer_list<std::pair<Label, double>> rows) {
  PredictionSet out;
  int i = 0;
  for (auto [label, prob] : rows) {
    out.push_back({"s" + std::to_string(i), "p" + std::to_string(i), label, prob, -1});
    ++i;
  }
  return out;
}

// Confusion matrix with given counts (threshold 0.5).
PredictionSet from_counts(int tp, int fn, int tn, int fp) {
  PredictionSet out;
  auto add = [&](Label l, double p, int n) {
    for (int i = 0; i < n; ++i) out.push_back({"s" + std::to_string(out.size()), "p", l, p, -1});
  };
  add(Label::effective, 0.9, tp);
  add(Label::effective, 0.1, fn);
  add(Label::invalid, 0.1, tn);
  add(Label::invalid, 0.9, fp);
  return out;
}

}  // namespace

TEST_CASE("AUC equals pair counting; ROC trapezoid agrees") {
  Rng rng(99);
  for (int t = 0; t < 1000; ++t) {
    const auto preds = testutil::random_predictions(rng);
    const double a = auc(preds);
    CHECK(a == oracle::pair_count_auc(preds));
    const auto roc = roc_curve(preds);
    CHECK(std::fabs(roc.auc - a) <= 1e-12);
    CHECK(roc.points.front().fpr == 0.0);
    CHECK(roc.points.front().tpr == 0.0);
    CHECK(roc.points.back().fpr == 1.0);
    CHECK(roc.points.back().tpr == 1.0);
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr);
      CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr);
      CHECK(roc.points[i].threshold < roc.points[i - 1].threshold);
    }
  }
}

TEST_CASE("AUC is invariant under strictly increasing transforms") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    auto preds = testutil::random_predictions(rng);
    const double a = auc(preds);
    for (auto f : {+[](double p) { return p * p * p; }, +[](double p) { return std::exp(3 * p) - 1; },
                   +[](double p) { return std::log1p(p) / 2; }}) {
      auto moved = preds;
      for (auto& p : moved) p.probability = f(p.probability);
      CHECK(auc(moved) == a);
    }
  }
}

TEST_CASE("AUC and ROC edge cases") {
  CHECK(auc(make({{Label::effective, 0.9}, {Label::invalid, 0.1}, {Label::effective, 0.8}})) == 1.0);
  CHECK(auc(make({{Label::effective, 0.5}, {Label::invalid, 0.5}, {Label::invalid, 0.5}})) == 0.5);
  CHECK_THROWS_AS(auc(make({{Label::effective, 0.5}, {Label::effective, 0.2}})), DegenerateError);
  CHECK_THROWS_AS(roc_curve(make({{Label::invalid, 0.5}})), DegenerateError);

  const auto sep = roc_curve(make({{Label::effective, 0.9}, {Label::invalid, 0.1}}));
  REQUIRE(sep.points.size() == 3);
  CHECK(sep.points[1].fpr == 0.0);
  CHECK(sep.points[1].tpr == 1.0);
  const auto tied = roc_curve(make({{Label::effective, 0.3}, {Label::invalid, 0.3}}));
  REQUIRE(tied.points.size() == 2);
  CHECK(tied.auc == 0.5);
}

TEST_CASE("threshold metrics") {
  const auto perfect = from_counts(5, 0, 5, 0);
  CHECK(balanced_accuracy(perfect) == 1.0);
  CHECK(accuracy(perfect) == 1.0);
  CHECK(f1(perfect) == 1.0);

  // Positive recall 0.6, negative recall 0.7.
  CHECK(balanced_accuracy(from_counts(6, 4, 7, 3)) == doctest::Approx(0.65).epsilon(1e-15));
  CHECK(accuracy(from_counts(6, 4, 7, 3)) == doctest::Approx(13.0 / 20).epsilon(1e-15));
  // Precision 0.5, recall 1.
  CHECK(f1(from_counts(4, 0, 0, 4)) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  // F1 for the invalid class instead.
  CHECK(f1(from_counts(4, 0, 0, 4), {0.5, Label::invalid}) == 0.0);

  const auto warnings = log::warning_count();
  CHECK(f1(from_counts(0, 3, 3, 0)) == 0.0);
  CHECK(log::warning_count() == warnings);
  CHECK(f1(from_counts(0, 0, 3, 0)) == 0.0);
  CHECK(log::warning_count() > warnings);

  const auto at = make({{Label::effective, 0.5}, {Label::invalid, 0.49}});
  CHECK(accuracy(at) == 1.0);
  CHECK(accuracy(at, {0.6, Label::effective}) == 0.5);
}

TEST_CASE("bootstrap contract") {
  const auto constant = from_counts(10, 0, 10, 0);
  BootstrapOptions opt;
  opt.iterations = 5000;
  opt.seed = 3;
  const auto s = bootstrap(constant, Metric::accuracy, opt);
  CHECK(s.std == 0.0);
  CHECK(s.mean == 1.0);
  CHECK(s.ci_low == 1.0);
  CHECK(s.ci_high == 1.0);

  Rng rng(8);
  auto preds = testutil::random_predictions(rng, 50);
  const auto a = bootstrap(preds, kAllMetrics, opt);
  CHECK(bootstrap(preds, kAllMetrics, opt) == a);
  for (unsigned w : {2u, 5u}) {
    auto o = opt;
    o.workers = w;
    CHECK(bootstrap(preds, kAllMetrics, o) == a);
  }
  auto other = opt;
  other.seed = 4;
  CHECK_FALSE(bootstrap(preds, Metric::auc, other).mean == a.at(Metric::auc).mean);
  for (const auto& [m, st] : a) {
    CHECK(st.mean >= st.min);
    CHECK(st.mean <= st.max);
    CHECK(st.ci_low <= st.ci_high);
    CHECK(st.valid + st.degenerate == opt.iterations);
  }

  auto bad = opt;
  bad.iterations = 0;
  CHECK_THROWS_AS(bootstrap(preds, Metric::auc, bad), ValidationError);
  CHECK_THROWS_AS(bootstrap(make({{Label::effective, 0.5}}), Metric::auc, opt), DegenerateError);
}

TEST_CASE("bootstrap mean accuracy tracks the point estimate on a balanced set") {
  Rng rng(31);
  PredictionSet preds;
  for (int i = 0; i < 100; ++i) {
    const Label l = i < 50 ? Label::effective : Label::invalid;
    const double shift = l == Label::effective ? 0.15 : -0.15;
    preds.push_back({"s" + std::to_string(i), "p" + std::to_string(i), l, std::clamp(0.5 + shift + 0.3 * (uniform01(rng) - 0.5) * 2, 0.0, 1.0), -1});
  }
  BootstrapOptions opt;
  opt.iterations = 20000;
  const auto s = bootstrap(preds, Metric::accuracy, opt);
  CHECK(std::fabs(s.mean - accuracy(preds)) < 0.01);
}

TEST_CASE("identity resample reproduces the point estimate") {
  Rng rng(2);
  const auto preds = testutil::random_predictions(rng);
  std::vector<std::size_t> identity(preds.size());
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  for (auto m : kAllMetrics) {
    const auto s = bootstrap_from_resamples(preds, m, {identity});
    CHECK(s.mean == evaluate(m, preds));
    CHECK(s.std == 0.0);
  }
}

TEST_CASE("summary statistics") {
  const auto s = summarize({1, 2, 3, 4}, 2);
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.ci_low == doctest::Approx(1 + 0.025 * 3));
  CHECK(s.ci_high == doctest::Approx(1 + 0.975 * 3));
  CHECK(s.degenerate == 2);
}

TEST_CASE("patient-level and fold-averaged bootstrap") {
  Rng rng(4);
  auto preds = testutil::random_predictions(rng, 50);
  for (std::size_t i = 0; i < preds.size(); ++i) preds[i].fold = static_cast<int>(i % 3);
  BootstrapOptions opt;
  opt.iterations = 2000;
  opt.unit = ResampleUnit::patient;
  const auto a = bootstrap(preds, Metric::accuracy, opt);
  CHECK(a.valid == 2000);
  const auto f = bootstrap_fold_averaged(preds, kAllMetrics, opt);
  CHECK(f.size() == 4);
  CHECK(folds_of(preds) == std::vector<int>{0, 1, 2});
  CHECK(subset_fold(preds, 1).size() == preds.size() / 3 + (preds.size() % 3 > 1));
}

TEST_CASE("report and CSV formats") {
  Rng rng(6);
  auto preds = testutil::random_predictions(rng, 40);
  for (std::size_t i = 0; i < preds.size(); ++i) preds[i].fold = static_cast<int>(i % 2);
  CHECK(predictions_from_csv(predictions_to_csv(preds)) == preds);

  BootstrapOptions opt;
  opt.iterations = 500;
  const auto report = build_report(preds, opt);
  const auto j = nlohmann::json::parse(report_to_json(report));
  CHECK(j.contains("pooled"));
  CHECK(j["bootstrap"]["iterations"] == 500);
  CHECK(report.folds.size() == 2);
  CHECK(report.point.at(Metric::auc).value() == auc(preds));
  const auto roc = roc_to_csv(report.roc);
  CHECK(roc.rfind("fpr,tpr,threshold\n", 0) == 0);
}
