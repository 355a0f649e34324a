#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slidemil/nn/matrix.hpp"

namespace slidemil::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double l2_weight = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with coupled L2: the penalty gradient l2·θ is added to the loss
/// gradient before the moment updates.
class AdamState {
 public:
  AdamState() = default;
  /// One moment buffer pair per parameter tensor, shaped like `shapes`.
  AdamState(std::span<const Matrix* const> shapes, AdamOptions options);

  /// Applies one bias-corrected update. Throws before touching any parameter
  /// if a gradient entry is non-finite.
  void step(std::span<Matrix* const> params, std::span<const Matrix* const> grads);

  std::uint64_t steps() const noexcept { return step_; }
  const AdamOptions& options() const noexcept { return options_; }
  const std::vector<Matrix>& first_moments() const noexcept { return m_; }
  const std::vector<Matrix>& second_moments() const noexcept { return v_; }

 private:
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace slidemil::nn
