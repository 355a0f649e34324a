#include <doctest.h>

#include <cmath>
#include <vector>

#include "../support/oracles.hpp"
#include "../support/random.hpp"
#include "slidemil/common/error.hpp"
#include "slidemil/nn/adam.hpp"
#include "slidemil/nn/gradient_check.hpp"
#include "slidemil/nn/layers.hpp"
#include "slidemil/nn/matrix.hpp"

using namespace slidemil;
using nn::Matrix;

TEST_CASE("matmul basics") {
  const Matrix m{{1, 2}, {3, 4}};
  CHECK(nn::matmul(Matrix::identity(2), m) == m);
  CHECK(nn::matmul(m, Matrix{{1}, {1}}) == Matrix{{3}, {7}});
  CHECK(nn::matmul(Matrix(3, 2), m) == Matrix(3, 2));
  CHECK_THROWS_AS(nn::matmul(m, Matrix(3, 1)), DimensionError);
}

TEST_CASE("transposed products agree with explicit transposes") {
  Rng rng(3);
  const Matrix a = testutil::gaussian(4, 3, rng), b = testutil::gaussian(4, 5, rng), c = testutil::gaussian(6, 3, rng);
  const Matrix tn = nn::matmul_tn(a, b), ref_tn = nn::matmul(nn::transpose(a), b);
  const Matrix nt = nn::matmul_nt(a, c), ref_nt = nn::matmul(a, nn::transpose(c));
  for (std::size_t i = 0; i < tn.size(); ++i) CHECK(tn.values()[i] == doctest::Approx(ref_tn.values()[i]).epsilon(1e-14));
  for (std::size_t i = 0; i < nt.size(); ++i) CHECK(nt.values()[i] == doctest::Approx(ref_nt.values()[i]).epsilon(1e-14));
}

TEST_CASE("linear layer") {
  const Matrix x{{1, 2, 3}};
  CHECK(nn::linear_forward(x, Matrix::identity(3), Matrix(1, 3)) == x);
  const Matrix y = nn::linear_forward(Matrix{{3}}, Matrix{{2}}, Matrix{{1}});
  CHECK(y(0, 0) == 7);
  CHECK(nn::linear_backward(Matrix{{3}}, Matrix{{2}}, Matrix{{1}}).input(0, 0) == 2);
  CHECK_THROWS_AS(nn::linear_forward(x, Matrix(2, 2), Matrix(1, 2)), DimensionError);
}

// Loss = Σ G ⊙ f(params) for a fixed random G, so the analytic gradient of
// every parameter comes from the layer's backward with grad_out = G.
TEST_CASE("layer gradients match central differences on 100 seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Matrix x = testutil::gaussian(4, 3, rng), w = testutil::gaussian(3, 2, rng), b = testutil::gaussian(1, 2, rng);
    const Matrix g = testutil::gaussian(4, 2, rng);
    auto dot = [](const Matrix& a, const Matrix& c) {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * c.values()[i];
      return s;
    };
    const auto grads = nn::linear_backward(x, w, g);
    auto linear_loss = [&] { return dot(g, nn::linear_forward(x, w, b)); };
    for (auto [param, analytic] : {std::pair{&x, &grads.input}, {&w, &grads.weight}, {&b, &grads.bias}}) {
      const auto r = nn::gradient_check(linear_loss, param->values(), analytic->values());
      CHECK(r.max_relative_error < 1e-4);
    }

    using Fwd = Matrix (*)(const Matrix&);
    using Bwd = Matrix (*)(const Matrix&, const Matrix&);
    struct Act {
      Fwd f;
      Bwd b;
      bool takes_output;
    };
    for (const Act act : {Act{nn::tanh_forward, nn::tanh_backward, true},
                          Act{nn::sigmoid_forward, nn::sigmoid_backward, true},
                          Act{nn::softmax_rows, nn::softmax_rows_backward, true},
                          Act{nn::softmax_cols, nn::softmax_cols_backward, true},
                          Act{nn::relu_forward, nn::relu_backward, false}}) {
      Matrix in = testutil::gaussian(4, 2, rng);
      const Matrix out = act.f(in);
      const Matrix analytic = act.b(act.takes_output ? out : in, g);
      const auto r = nn::gradient_check([&] { return dot(g, act.f(in)); }, in.values(), analytic.values());
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("softmax") {
  CHECK(nn::softmax_rows(Matrix{{4.2}})(0, 0) == 1.0);
  const Matrix half = nn::softmax_rows(Matrix{{0, 0}});
  CHECK(half(0, 0) == 0.5);
  CHECK(half(0, 1) == 0.5);
  const Matrix big = nn::softmax_rows(Matrix{{1000, 0}});
  CHECK(big(0, 0) == 1.0);
  CHECK(big(0, 1) == doctest::Approx(std::exp(-1000.0)));  // underflows to 0 in double; no NaN
  CHECK(big.all_finite());

  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    Matrix x = testutil::gaussian(3, 5, rng, 5.0);
    const Matrix y = nn::softmax_rows(x);
    for (double& v : x.values()) v += 17.5;
    const Matrix shifted = nn::softmax_rows(x);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (double v : y.row(r)) s += v;
      CHECK(std::fabs(s - 1.0) < 1e-12);
    }
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::fabs(y.values()[i] - shifted.values()[i]) < 1e-12);
  }
}

TEST_CASE("activation ranges") {
  const Matrix x{{-30, -1, 0, 1, 30}};
  const Matrix t = nn::tanh_forward(x), s = nn::sigmoid_forward(x);
  for (double v : t.values()) CHECK((v >= -1 && v <= 1));
  for (double v : s.values()) CHECK((v >= 0 && v <= 1));
  CHECK(nn::sigmoid_forward(Matrix{{0}})(0, 0) == 0.5);
}

TEST_CASE("cross entropy") {
  CHECK(nn::cross_entropy(Matrix{{0, 0}}, 0).loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(nn::cross_entropy(Matrix{{10, -10}}, 0).loss < 1e-8);
  CHECK_THROWS_AS(nn::cross_entropy(Matrix{{0, 0}}, 2), ValidationError);
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    Matrix logits = testutil::gaussian(1, 2, rng, 3.0);
    const std::size_t label = t % 2;
    const auto lg = nn::cross_entropy(logits, label);
    const auto r = nn::gradient_check([&] { return nn::cross_entropy(logits, label).loss; }, logits.values(),
                                      lg.grad.values(), {1e-5, 1e-6, 1e-6});
    CHECK(r.passed);
  }
}

TEST_CASE("dropout") {
  Rng rng(1);
  CHECK_FALSE(nn::dropout_mask(2, 2, nn::DropoutSpec::inference(), rng).has_value());
  Matrix x{{1, 2}, {3, 4}};
  const Matrix before = x;
  nn::apply_mask(x, nn::dropout_mask(2, 2, nn::DropoutSpec::inference(), rng));
  CHECK(x == before);

  // Expectation is preserved: mean of 10^5 masked copies of v ≈ v.
  const std::vector<double> v{1.0, -2.0, 0.5, 3.0};
  std::vector<double> acc(v.size());
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto mask = nn::dropout_mask(1, v.size(), nn::DropoutSpec::training(0.5), rng);
    for (std::size_t j = 0; j < v.size(); ++j) acc[j] += v[j] * (*mask)(0, j);
  }
  for (std::size_t j = 0; j < v.size(); ++j) CHECK(std::fabs(acc[j] / n - v[j]) < 0.02 * std::fabs(v[j]));

  const auto mask = nn::dropout_mask(50, 50, nn::DropoutSpec::training(0.85), rng);
  for (double m : mask->values()) CHECK((m == 0.0 || std::fabs(m - 1.0 / 0.15) < 1e-12));
}

TEST_CASE("adam") {
  Matrix p(1, 1, 0.0);
  Matrix g(1, 1, 1.0);
  std::vector<Matrix*> params{&p};
  std::vector<const Matrix*> grads{&g};
  std::vector<const Matrix*> shapes{&p};

  nn::AdamState adam(shapes, {0.01, 0.0});
  adam.step(params, grads);
  // t = 1: m̂ = g, v̂ = g², update = lr·g/(|g| + eps).
  CHECK(p(0, 0) == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-14));
  CHECK(adam.steps() == 1);

  Matrix q(1, 1, 2.0), zero(1, 1, 0.0);
  std::vector<Matrix*> qp{&q};
  std::vector<const Matrix*> zg{&zero};
  nn::AdamState plain(std::vector<const Matrix*>{&q}, {0.01, 0.0});
  plain.step(qp, zg);
  CHECK(q(0, 0) == 2.0);

  // Coupled L2 with zero loss gradient equals Adam on g = l2·θ.
  nn::AdamState decay(std::vector<const Matrix*>{&q}, {0.01, 0.5});
  Matrix r(1, 1, 2.0), rg(1, 1, 0.5 * 2.0);
  std::vector<Matrix*> rp{&r};
  std::vector<const Matrix*> rgs{&rg};
  nn::AdamState manual(std::vector<const Matrix*>{&r}, {0.01, 0.0});
  decay.step(qp, zg);
  manual.step(rp, rgs);
  CHECK(q(0, 0) < 2.0);
  CHECK(q(0, 0) == r(0, 0));

  nn::AdamState frozen(std::vector<const Matrix*>{&q}, {0.0, 0.5});
  const double before = q(0, 0);
  Matrix big(1, 1, 123.0);
  std::vector<const Matrix*> bg{&big};
  for (int i = 0; i < 10; ++i) frozen.step(qp, bg);
  CHECK(q(0, 0) == before);

  Matrix bad(1, 1, std::nan(""));
  std::vector<const Matrix*> badg{&bad};
  CHECK_THROWS_AS(frozen.step(qp, badg), Error);
  CHECK(q(0, 0) == before);
  CHECK(frozen.steps() == 10);
}

TEST_CASE("gradient check detects a corrupted backward") {
  Rng rng(9);
  Matrix x = testutil::gaussian(3, 4, rng), w = testutil::gaussian(4, 2, rng), b(1, 2);
  const std::size_t label = 1;
  auto loss = [&] {
    const Matrix logits = nn::linear_forward(x, w, b);
    return nn::cross_entropy(Matrix{{logits(0, 0), logits(0, 1)}}, label).loss;
  };
  const Matrix logits = nn::linear_forward(x, w, b);
  const auto ce = nn::cross_entropy(Matrix{{logits(0, 0), logits(0, 1)}}, label);
  Matrix grad_out(3, 2);
  grad_out(0, 0) = ce.grad(0, 0);
  grad_out(0, 1) = ce.grad(0, 1);
  Matrix gw = nn::linear_backward(x, w, grad_out).weight;
  CHECK(nn::gradient_check(loss, w.values(), gw.values()).max_relative_error < 1e-4);
  gw(2, 1) *= 1.1;
  CHECK_FALSE(nn::gradient_check(loss, w.values(), gw.values()).passed);
}
