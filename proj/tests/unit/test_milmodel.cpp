#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "../support/oracles.hpp"
#include "../support/random.hpp"
#include "slidemil/common/error.hpp"
#include "slidemil/mil/checkpoint.hpp"
#include "slidemil/mil/model.hpp"
#include "slidemil/nn/gradient_check.hpp"

using namespace slidemil;
using mil::MilModelParams;
using nn::Matrix;

namespace {

// Random weights (not the small initializer) so every path carries signal;
// biases nonzero so the relu kinks sit away from zero inputs.
MilModelParams random_params(std::size_t d, std::size_t l, bool inst, Rng& rng) {
  auto p = MilModelParams::initialize(d, l, inst, rng());
  for (Matrix* t : p.tensors()) *t = testutil::gaussian(t->rows(), t->cols(), rng, 0.7);
  return p;
}

const auto kEval = nn::DropoutSpec::inference();

}  // namespace

TEST_CASE("forward matches an independent step-by-step evaluation") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto p = random_params(8, 16, false, rng);
    const Matrix x = testutil::gaussian(6, 8, rng);
    const auto r = mil::forward_bag(x, p, kEval);
    const auto ref = oracle::forward(x, p);
    CHECK(r.logits(0, 0) == doctest::Approx(ref.logits[0]).epsilon(1e-12));
    CHECK(r.logits(0, 1) == doctest::Approx(ref.logits[1]).epsilon(1e-12));
    for (std::size_t k = 0; k < 6; ++k) CHECK(r.attention[k] == doctest::Approx(ref.attention[k]).epsilon(1e-12));
    CHECK(std::fabs(std::accumulate(r.attention.begin(), r.attention.end(), 0.0) - 1.0) < 1e-9);
  }
}

TEST_CASE("forward edge cases") {
  Rng rng(1);
  const auto p = random_params(4, 8, false, rng);
  CHECK(mil::forward_bag(testutil::gaussian(1, 4, rng), p, kEval).attention[0] == 1.0);

  Matrix dup = testutil::gaussian(3, 4, rng);
  std::copy(dup.row(0).begin(), dup.row(0).end(), dup.row(2).begin());
  const auto r = mil::forward_bag(dup, p, kEval);
  CHECK(r.attention[0] == r.attention[2]);

  CHECK_THROWS_AS(mil::forward_bag(Matrix(0, 4), p, kEval), InputError);
  CHECK_THROWS_AS(mil::forward_bag(Matrix(2, 5), p, kEval), DimensionError);
  CHECK_THROWS_AS(MilModelParams::initialize(4, 7, false, 0), ValidationError);
}

TEST_CASE("permutation equivariance, duplication invariance, determinism") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto p = random_params(5, 8, true, rng);
    const Matrix x = testutil::gaussian(7, 5, rng);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix px(7, 5), twice(14, 5);
    for (std::size_t k = 0; k < 7; ++k) {
      std::copy(x.row(perm[k]).begin(), x.row(perm[k]).end(), px.row(k).begin());
      std::copy(x.row(k).begin(), x.row(k).end(), twice.row(k).begin());
      std::copy(x.row(k).begin(), x.row(k).end(), twice.row(k + 7).begin());
    }
    const auto a = mil::forward_bag(x, p, kEval), b = mil::forward_bag(px, p, kEval);
    const auto c = mil::forward_bag(twice, p, kEval);
    for (std::size_t k = 0; k < 7; ++k) {
      CHECK(std::fabs(b.attention[k] - a.attention[perm[k]]) < 1e-12);
      CHECK(std::fabs(c.attention[k] - a.attention[k] / 2) < 1e-12);
    }
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(std::fabs(a.logits(0, j) - b.logits(0, j)) < 1e-12);
      CHECK(std::fabs(a.logits(0, j) - c.logits(0, j)) < 1e-12);
    }
    const auto again = mil::forward_bag(x, p, kEval);
    CHECK(again.logits == a.logits);
    CHECK(again.attention == a.attention);
  }
}

TEST_CASE("ABMIL gradients match finite differences of the reference loss") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    auto p = random_params(8, 16, false, rng);
    const Matrix x = testutil::gaussian(5, 8, rng);
    const std::size_t label = seed % 2;
    const auto loss = mil::backward_bag(mil::forward_bag(x, p, kEval), p, label);
    CHECK(loss.loss == doctest::Approx(oracle::bag_loss(x, p, label)).epsilon(1e-12));
    auto ptensors = p.tensors();
    const auto gtensors = loss.grads.tensors();
    for (std::size_t t = 0; t < ptensors.size(); ++t) {
      const auto r = nn::gradient_check([&] { return oracle::bag_loss(x, p, label); }, ptensors[t]->values(),
                                        gtensors[t]->values(), {1e-5, 1e-3, 1e-6});
      CHECK_MESSAGE(r.passed, "tensor " << t << " rel err " << r.max_relative_error);
    }
  }
}

TEST_CASE("single-instance bags have zero attention-branch gradients") {
  Rng rng(4);
  const auto p = random_params(6, 8, false, rng);
  const auto g = mil::backward_bag(mil::forward_bag(testutil::gaussian(1, 6, rng), p, kEval), p, 1).grads;
  for (const Matrix* t : {&g.attn_v_w, &g.attn_v_b, &g.attn_u_w, &g.attn_u_b, &g.attn_w, &g.attn_b}) {
    for (double v : t->values()) CHECK(v == 0.0);
  }
}

TEST_CASE("saturated correct logits give near-zero gradients") {
  Rng rng(2);
  auto p = random_params(4, 8, false, rng);
  p.cls_b = Matrix{{-40, 40}};
  const auto l = mil::backward_bag(mil::forward_bag(testutil::gaussian(3, 4, rng), p, kEval), p, mil::kEffective);
  CHECK(l.loss < 1e-15);
  for (const Matrix* t : l.grads.tensors())
    for (double v : t->values()) CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("backward needs the forward cache") {
  Rng rng(2);
  const auto p = random_params(4, 8, false, rng);
  const auto r = mil::forward_bag(testutil::gaussian(3, 4, rng), p, kEval, nullptr, false);
  CHECK_THROWS_AS(mil::backward_bag(r, p, 0), Error);
}

TEST_CASE("CLAM selection") {
  auto sel = mil::select_clam_instances({0.3, 0.7}, 1);
  CHECK(sel.top == std::vector<std::size_t>{1});
  CHECK(sel.bottom == std::vector<std::size_t>{0});
  // Clamp: B = 5 on 3 instances becomes 1.
  sel = mil::select_clam_instances({0.2, 0.5, 0.3}, 5);
  CHECK(sel.top.size() == 1);
  CHECK(sel.bottom.size() == 1);

  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(10);
    for (double& v : a) v = uniform01(rng);
    sel = mil::select_clam_instances(a, 2);
    std::vector<std::size_t> order(10);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i] > a[j] || (a[i] == a[j] && i < j); });
    std::vector<std::size_t> top(order.begin(), order.begin() + 2), bottom(order.end() - 2, order.end());
    auto sorted = [](std::vector<std::size_t> v) { std::sort(v.begin(), v.end()); return v; };
    CHECK(sorted(sel.top) == sorted(top));
    CHECK(sorted(sel.bottom) == sorted(bottom));
  }
}

TEST_CASE("CLAM loss: reduction to ABMIL and finite differences") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed + 100);
    auto p = random_params(8, 16, true, rng);
    const Matrix x = testutil::gaussian(6, 8, rng);
    const std::size_t label = seed % 2;
    const auto fwd = mil::forward_bag(x, p, kEval);

    const auto plain = mil::backward_bag(fwd, p, label);
    const auto zero = mil::clam_loss(fwd, p, label, {2, 0.0});
    CHECK(zero.loss == plain.loss);
    const auto pt = plain.grads.tensors(), zt = zero.grads.tensors();
    for (std::size_t t = 0; t < pt.size(); ++t) CHECK(*pt[t] == *zt[t]);

    const mil::ClamConfig cfg{2, 0.3};
    const auto full = mil::clam_loss(fwd, p, label, cfg);
    auto ptensors = p.tensors();
    const auto gtensors = full.grads.tensors();
    auto loss = [&] { return mil::clam_loss(mil::forward_bag(x, p, kEval), p, label, cfg).loss; };
    for (std::size_t t = 0; t < ptensors.size(); ++t) {
      const auto r = nn::gradient_check(loss, ptensors[t]->values(), gtensors[t]->values(), {1e-5, 1e-3, 1e-6});
      CHECK_MESSAGE(r.passed, "tensor " << t << " rel err " << r.max_relative_error);
    }
  }
  Rng rng(0);
  const auto p = random_params(4, 8, true, rng);
  CHECK_THROWS_AS(mil::clam_loss(mil::forward_bag(testutil::gaussian(1, 4, rng), p, kEval), p, 0, {}), InputError);
}

TEST_CASE("predict_proba and ensembles") {
  Rng rng(3);
  auto p = random_params(4, 8, false, rng);
  p.cls_w.fill(0.0);
  p.cls_b.fill(0.0);
  const Matrix x = testutil::gaussian(5, 4, rng);
  CHECK(mil::predict_proba(x, p) == 0.5);
  const auto q = random_params(4, 8, false, rng);
  const double single = mil::predict_proba(x, q);
  CHECK(single > 0.0);
  CHECK(single < 1.0);
  CHECK(mil::ensemble_proba(x, {q, q, q, q}) == doctest::Approx(single).epsilon(1e-15));
}

TEST_CASE("checkpoint round trip and corruption") {
  Rng rng(8);
  for (bool inst : {false, true}) {
    const auto p = random_params(6, 8, inst, rng);
    const auto bytes = mil::encode_checkpoint(p);
    CHECK(mil::decode_checkpoint(bytes) == p);
    auto cut = bytes;
    cut.resize(cut.size() - 3);
    CHECK_THROWS_AS(mil::decode_checkpoint(cut), InputError);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(mil::decode_checkpoint(bad), InputError);
  }
}

TEST_CASE("instance classifier init shares every other weight") {
  const auto a = MilModelParams::initialize(8, 16, false, 42), b = MilModelParams::initialize(8, 16, true, 42);
  CHECK(a.proj_w == b.proj_w);
  CHECK(a.attn_v_w == b.attn_v_w);
  CHECK(a.cls_w == b.cls_w);
  CHECK(b.inst_w.rows() == 8);
  CHECK(b.inst_w.cols() == 2);
}
