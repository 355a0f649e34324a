#pragma once

#include <cstddef>
#include <optional>

#include "slidemil/common/rng.hpp"
#include "slidemil/nn/matrix.hpp"

namespace slidemil::nn {

/// y = x·W + b with W stored in×out and b as 1×out, broadcast over rows.
Matrix linear_forward(const Matrix& x, const Matrix& weight, const Matrix& bias);

struct LinearGrads {
  Matrix input;
  Matrix weight;
  Matrix bias;
};

LinearGrads linear_backward(const Matrix& x, const Matrix& weight, const Matrix& grad_out);

Matrix tanh_forward(const Matrix& x);
/// Takes the forward output y = tanh(x).
Matrix tanh_backward(const Matrix& y, const Matrix& grad_out);

Matrix sigmoid_forward(const Matrix& x);
/// Takes the forward output y = sigmoid(x).
Matrix sigmoid_backward(const Matrix& y, const Matrix& grad_out);

Matrix relu_forward(const Matrix& x);
/// Takes the forward input x.
Matrix relu_backward(const Matrix& x, const Matrix& grad_out);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& x);
/// Softmax down each column (used to pool attention scores held as N×1).
Matrix softmax_cols(const Matrix& x);
/// Backward of a row-wise softmax given its output y.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& grad_out);
/// Backward of a column-wise softmax given its output y.
Matrix softmax_cols_backward(const Matrix& y, const Matrix& grad_out);

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;  // same shape as the logits
};

/// −log softmax(logits)[label] for a 1×C logits row; gradient softmax − one-hot.
LossAndGrad cross_entropy(const Matrix& logits, std::size_t label);

enum class DropoutMode { training, inference };

struct DropoutSpec {
  double probability = 0.0;
  DropoutMode mode = DropoutMode::inference;

  static DropoutSpec training(double p) { return {p, DropoutMode::training}; }
  static DropoutSpec inference() { return {0.0, DropoutMode::inference}; }
  bool active() const noexcept { return mode == DropoutMode::training && probability > 0.0; }
};

/// Inverted dropout mask: each entry 0 with probability p, else 1/(1−p).
/// Returns nullopt when the spec is inactive (identity).
std::optional<Matrix> dropout_mask(std::size_t rows, std::size_t cols, const DropoutSpec& spec, Rng& rng);

/// Applies an optional mask in place.
void apply_mask(Matrix& x, const std::optional<Matrix>& mask);

}  // namespace slidemil::nn
