#include "slidemil/nn/adam.hpp"

#include <cmath>

#include "slidemil/common/error.hpp"

namespace slidemil::nn {

AdamState::AdamState(std::span<const Matrix* const> shapes, AdamOptions options) : options_(options) {
  if (!(options.beta1 > 0.0 && options.beta1 < 1.0) || !(options.beta2 > 0.0 && options.beta2 < 1.0))
    throw ValidationError("Adam betas must lie in (0, 1)");
  if (options.learning_rate < 0.0) throw ValidationError("must be non-negative", "learning_rate");
  if (options.l2_weight < 0.0) throw ValidationError("must be non-negative", "l2_weight");
  m_.reserve(shapes.size());
  v_.reserve(shapes.size());
  for (const Matrix* p : shapes) {
    m_.emplace_back(p->rows(), p->cols());
    v_.emplace_back(p->rows(), p->cols());
  }
}

void AdamState::step(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw DimensionError("adam: parameter count does not match optimizer state");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t]->size() != m_[t].size() || grads[t]->size() != m_[t].size())
      throw DimensionError("adam: tensor shape does not match optimizer state");
    if (!grads[t]->all_finite()) throw Error("adam: non-finite gradient, step aborted");
  }

  ++step_;
  const auto& o = options_;
  const double correction1 = 1.0 - std::pow(o.beta1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(o.beta2, static_cast<double>(step_));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto theta = params[t]->values();
    auto g = grads[t]->values();
    auto m = m_[t].values();
    auto v = v_[t].values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i] + o.l2_weight * theta[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * gi;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * gi * gi;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace slidemil::nn
