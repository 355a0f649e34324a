#include "slidemil/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slidemil/common/error.hpp"

namespace slidemil::nn {

Matrix linear_forward(const Matrix& x, const Matrix& weight, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != weight.cols())
    throw DimensionError("linear: bias must be 1x" + std::to_string(weight.cols()));
  Matrix y = matmul(x, weight);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < y.cols(); ++j) r[j] += bias(0, j);
  }
  return y;
}

LinearGrads linear_backward(const Matrix& x, const Matrix& weight, const Matrix& grad_out) {
  if (grad_out.rows() != x.rows() || grad_out.cols() != weight.cols())
    throw DimensionError("linear_backward: grad_out shape does not match forward output");
  return {matmul_nt(grad_out, weight), matmul_tn(x, grad_out), column_sums(grad_out)};
}

Matrix tanh_forward(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = std::tanh(v);
  return y;
}

Matrix tanh_backward(const Matrix& y, const Matrix& grad_out) {
  Matrix g = grad_out;
  auto gv = g.values();
  auto yv = y.values();
  if (gv.size() != yv.size()) throw DimensionError("tanh_backward: shape mismatch");
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= 1.0 - yv[i] * yv[i];
  return g;
}

Matrix sigmoid_forward(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  return y;
}

Matrix sigmoid_backward(const Matrix& y, const Matrix& grad_out) {
  Matrix g = grad_out;
  auto gv = g.values();
  auto yv = y.values();
  if (gv.size() != yv.size()) throw DimensionError("sigmoid_backward: shape mismatch");
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= yv[i] * (1.0 - yv[i]);
  return g;
}

Matrix relu_forward(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& x, const Matrix& grad_out) {
  Matrix g = grad_out;
  auto gv = g.values();
  auto xv = x.values();
  if (gv.size() != xv.size()) throw DimensionError("relu_backward: shape mismatch");
  for (std::size_t i = 0; i < gv.size(); ++i)
    if (!(xv[i] > 0.0)) gv[i] = 0.0;
  return g;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y = x;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    const double peak = *std::max_element(r.begin(), r.end());
    double total = 0.0;
    for (double& v : r) {
      v = std::exp(v - peak);
      total += v;
    }
    for (double& v : r) v /= total;
  }
  return y;
}

Matrix softmax_cols(const Matrix& x) { return transpose(softmax_rows(transpose(x))); }

Matrix softmax_rows_backward(const Matrix& y, const Matrix& grad_out) {
  if (y.rows() != grad_out.rows() || y.cols() != grad_out.cols())
    throw DimensionError("softmax_backward: shape mismatch");
  Matrix g(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) dot += y(i, j) * grad_out(i, j);
    for (std::size_t j = 0; j < y.cols(); ++j) g(i, j) = y(i, j) * (grad_out(i, j) - dot);
  }
  return g;
}

Matrix softmax_cols_backward(const Matrix& y, const Matrix& grad_out) {
  return transpose(softmax_rows_backward(transpose(y), transpose(grad_out)));
}

LossAndGrad cross_entropy(const Matrix& logits, std::size_t label) {
  if (logits.rows() != 1) throw DimensionError("cross_entropy: expects a single logits row");
  if (label >= logits.cols())
    throw ValidationError("label index " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.cols()) + " classes");
  auto r = logits.row(0);
  const double peak = *std::max_element(r.begin(), r.end());
  double total = 0.0;
  for (double v : r) total += std::exp(v - peak);
  const double log_z = peak + std::log(total);

  LossAndGrad out{log_z - r[label], Matrix(1, logits.cols())};
  for (std::size_t j = 0; j < logits.cols(); ++j) out.grad(0, j) = std::exp(r[j] - log_z);
  out.grad(0, label) -= 1.0;
  return out;
}

std::optional<Matrix> dropout_mask(std::size_t rows, std::size_t cols, const DropoutSpec& spec, Rng& rng) {
  if (!spec.active()) return std::nullopt;
  if (!(spec.probability >= 0.0 && spec.probability < 1.0))
    throw ValidationError("dropout probability must lie in [0, 1)", "dropout");
  const double keep_scale = 1.0 / (1.0 - spec.probability);
  Matrix mask(rows, cols);
  for (double& v : mask.values()) v = uniform01(rng) < spec.probability ? 0.0 : keep_scale;
  return mask;
}

void apply_mask(Matrix& x, const std::optional<Matrix>& mask) {
  if (!mask) return;
  x = hadamard(x, *mask);
}

}  // namespace slidemil::nn
