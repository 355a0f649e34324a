#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "slidemil/common/rng.hpp"
#include "slidemil/nn/layers.hpp"
#include "slidemil/nn/matrix.hpp"

namespace slidemil::mil {

using nn::Matrix;

/// Class indices of the bag logits.
inline constexpr std::size_t kInvalid = 0;
inline constexpr std::size_t kEffective = 1;

/// Weights of the gated-attention MIL head.
///
/// Per instance x (1×D):
///   h = relu(x·proj_w + proj_b)                      (1×H, H = L/2)
///   t = tanh(x·attn_v_w + attn_v_b)                   (1×L)
///   s = sigmoid(x·attn_u_w + attn_u_b)                (1×L)
///   score = (t ⊙ s)·attn_w + attn_b
/// Bag: a = softmax(scores), z = Σ a_k h_k, logits = z·cls_w + cls_b.
/// The optional instance classifier maps each h_k to two logits (CLAM).
struct MilModelParams {
  std::size_t input_dim = 0;
  std::size_t attention_dim = 0;

  Matrix proj_w, proj_b;
  Matrix attn_v_w, attn_v_b;
  Matrix attn_u_w, attn_u_b;
  Matrix attn_w, attn_b;
  Matrix cls_w, cls_b;
  Matrix inst_w, inst_b;  // empty unless has_instance_classifier()

  std::size_t hidden_dim() const noexcept { return attention_dim / 2; }
  bool has_instance_classifier() const noexcept { return !inst_w.empty(); }

  /// All tensors in a fixed order (checkpoint and optimizer order).
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;

  /// Same shapes, all zero. Used as a gradient accumulator.
  MilModelParams zeros_like() const;

  /// Xavier-uniform weights, zero biases. The instance classifier draws from
  /// its own stream so that ABMIL and CLAM heads built from the same seed share
  /// every other weight.
  static MilModelParams initialize(std::size_t input_dim, std::size_t attention_dim, bool instance_classifier,
                                   std::uint64_t seed);

  friend bool operator==(const MilModelParams&, const MilModelParams&) = default;
};

void validate(const MilModelParams& params);

struct ForwardCache {
  Matrix input;
  Matrix proj_pre;
  Matrix hidden;  // after relu and dropout
  std::optional<Matrix> proj_mask;
  Matrix attn_t;  // tanh branch output before dropout
  Matrix attn_s;  // sigmoid branch output before dropout
  std::optional<Matrix> attn_t_mask;
  std::optional<Matrix> attn_s_mask;
  Matrix gated;
  Matrix pooled;  // z, 1×H
};

struct BagForwardResult {
  Matrix logits;                   // 1×2
  std::vector<double> attention;   // one weight per instance, sums to 1
  std::optional<Matrix> instance_logits;  // N×2 when the instance classifier exists
  std::optional<ForwardCache> cache;
};

/// Training-mode dropout needs `rng`; inference mode ignores it.
BagForwardResult forward_bag(const Matrix& bag, const MilModelParams& params, const nn::DropoutSpec& dropout,
                             Rng* rng = nullptr, bool keep_cache = true);

struct BagLoss {
  double loss = 0.0;
  double bag_loss = 0.0;
  double instance_loss = 0.0;
  MilModelParams grads;
};

/// Cross-entropy of the bag logits against `label`, scaled by `class_weight`,
/// with exact gradients for every head parameter.
BagLoss backward_bag(const BagForwardResult& result, const MilModelParams& params, std::size_t label,
                     double class_weight = 1.0);

struct ClamConfig {
  std::size_t top_k = 8;  // B
  double instance_loss_weight = 0.3;
};

struct ClamSelection {
  std::vector<std::size_t> top;     // highest attention, pseudo-label = bag label
  std::vector<std::size_t> bottom;  // lowest attention, pseudo-label = opposite
};

/// Ranks instances by attention (descending, ties by index) and takes the
/// first and last B. B is clamped to ⌊N/2⌋.
ClamSelection select_clam_instances(const std::vector<double>& attention, std::size_t top_k);

/// (1−c)·bag CE + c·mean instance CE over the 2B selected instances.
BagLoss clam_loss(const BagForwardResult& result, const MilModelParams& params, std::size_t label,
                  const ClamConfig& cfg, double class_weight = 1.0);

/// softmax(logits)[effective] with dropout off.
double predict_proba(const Matrix& bag, const MilModelParams& params);

/// Mean of predict_proba over several heads.
double ensemble_proba(const Matrix& bag, const std::vector<MilModelParams>& members);

}  // namespace slidemil::mil
