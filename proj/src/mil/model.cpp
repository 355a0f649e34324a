#include "slidemil/mil/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "slidemil/common/error.hpp"

namespace slidemil::mil {

using nn::Matrix;

std::vector<Matrix*> MilModelParams::tensors() {
  std::vector<Matrix*> out{&proj_w, &proj_b, &attn_v_w, &attn_v_b, &attn_u_w, &attn_u_b,
                           &attn_w, &attn_b, &cls_w,    &cls_b};
  if (has_instance_classifier()) {
    out.push_back(&inst_w);
    out.push_back(&inst_b);
  }
  return out;
}

std::vector<const Matrix*> MilModelParams::tensors() const {
  auto mutable_view = const_cast<MilModelParams*>(this)->tensors();
  return {mutable_view.begin(), mutable_view.end()};
}

MilModelParams MilModelParams::zeros_like() const {
  MilModelParams z = *this;
  for (Matrix* t : z.tensors()) t->fill(0.0);
  return z;
}

namespace {

Matrix xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (double& v : w.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  return w;
}

}  // namespace

MilModelParams MilModelParams::initialize(std::size_t input_dim, std::size_t attention_dim,
                                          bool instance_classifier, std::uint64_t seed) {
  if (input_dim == 0) throw ValidationError("must be positive", "input_dim");
  if (attention_dim < 2 || attention_dim % 2 != 0) throw ValidationError("must be even and >= 2", "attention_dim");
  const std::size_t hidden = attention_dim / 2;

  Rng rng = make_rng(seed, {tag("head")});
  MilModelParams p;
  p.input_dim = input_dim;
  p.attention_dim = attention_dim;
  p.proj_w = xavier(input_dim, hidden, rng);
  p.proj_b = Matrix(1, hidden);
  p.attn_v_w = xavier(input_dim, attention_dim, rng);
  p.attn_v_b = Matrix(1, attention_dim);
  p.attn_u_w = xavier(input_dim, attention_dim, rng);
  p.attn_u_b = Matrix(1, attention_dim);
  p.attn_w = xavier(attention_dim, 1, rng);
  p.attn_b = Matrix(1, 1);
  p.cls_w = xavier(hidden, 2, rng);
  p.cls_b = Matrix(1, 2);
  if (instance_classifier) {
    Rng inst_rng = make_rng(seed, {tag("instance-head")});
    p.inst_w = xavier(hidden, 2, inst_rng);
    p.inst_b = Matrix(1, 2);
  }
  return p;
}

void validate(const MilModelParams& p) {
  const std::size_t d = p.input_dim, l = p.attention_dim, h = p.hidden_dim();
  if (d == 0 || l < 2 || l % 2 != 0) throw ValidationError("model dims invalid (D>0, L even)");
  auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c)
      throw DimensionError(std::string("model tensor ") + name + " has shape " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" + std::to_string(c));
    if (!m.all_finite()) throw ValidationError(std::string("model tensor ") + name + " has non-finite entries");
  };
  expect(p.proj_w, d, h, "proj_w");
  expect(p.proj_b, 1, h, "proj_b");
  expect(p.attn_v_w, d, l, "attn_v_w");
  expect(p.attn_v_b, 1, l, "attn_v_b");
  expect(p.attn_u_w, d, l, "attn_u_w");
  expect(p.attn_u_b, 1, l, "attn_u_b");
  expect(p.attn_w, l, 1, "attn_w");
  expect(p.attn_b, 1, 1, "attn_b");
  expect(p.cls_w, h, 2, "cls_w");
  expect(p.cls_b, 1, 2, "cls_b");
  if (p.has_instance_classifier()) {
    expect(p.inst_w, h, 2, "inst_w");
    expect(p.inst_b, 1, 2, "inst_b");
  }
}

BagForwardResult forward_bag(const Matrix& bag, const MilModelParams& params, const nn::DropoutSpec& dropout,
                             Rng* rng, bool keep_cache) {
  if (bag.rows() == 0) throw InputError("empty bag");
  if (bag.cols() != params.input_dim)
    throw DimensionError("bag feature dim " + std::to_string(bag.cols()) + " does not match model input dim " +
                         std::to_string(params.input_dim));
  if (dropout.active() && rng == nullptr) throw ValidationError("training-mode dropout requires an rng");
  const std::size_t n = bag.rows();

  ForwardCache c;
  c.proj_pre = nn::linear_forward(bag, params.proj_w, params.proj_b);
  c.hidden = nn::relu_forward(c.proj_pre);
  if (dropout.active()) c.proj_mask = nn::dropout_mask(n, params.hidden_dim(), dropout, *rng);
  nn::apply_mask(c.hidden, c.proj_mask);

  c.attn_t = nn::tanh_forward(nn::linear_forward(bag, params.attn_v_w, params.attn_v_b));
  c.attn_s = nn::sigmoid_forward(nn::linear_forward(bag, params.attn_u_w, params.attn_u_b));
  if (dropout.active()) {
    c.attn_t_mask = nn::dropout_mask(n, params.attention_dim, dropout, *rng);
    c.attn_s_mask = nn::dropout_mask(n, params.attention_dim, dropout, *rng);
  }
  Matrix t = c.attn_t;
  Matrix s = c.attn_s;
  nn::apply_mask(t, c.attn_t_mask);
  nn::apply_mask(s, c.attn_s_mask);
  c.gated = nn::hadamard(t, s);

  const Matrix scores = nn::linear_forward(c.gated, params.attn_w, params.attn_b);  // N×1
  const Matrix weights = nn::softmax_cols(scores);

  c.pooled = nn::matmul_tn(weights, c.hidden);  // 1×H

  BagForwardResult out;
  out.logits = nn::linear_forward(c.pooled, params.cls_w, params.cls_b);
  out.attention.assign(weights.values().begin(), weights.values().end());
  if (params.has_instance_classifier())
    out.instance_logits = nn::linear_forward(c.hidden, params.inst_w, params.inst_b);
  if (keep_cache) {
    c.input = bag;
    out.cache = std::move(c);
  }
  return out;
}

namespace {

/// Backpropagates logit gradients (and optional per-instance logit gradients)
/// through the head.
MilModelParams backprop(const BagForwardResult& result, const MilModelParams& params, const Matrix& d_logits,
                        const Matrix* d_instance) {
  if (!result.cache) throw Error("backward_bag: forward result has no cached intermediates");
  const ForwardCache& c = *result.cache;
  const std::size_t n = c.input.rows();
  const std::size_t h = params.hidden_dim();

  MilModelParams g = params.zeros_like();
  g.cls_w = nn::matmul_tn(c.pooled, d_logits);
  g.cls_b = d_logits;
  const Matrix d_pooled = nn::matmul_nt(d_logits, params.cls_w);  // 1×H

  Matrix d_hidden(n, h);
  Matrix d_attention(n, 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = result.attention[k];
    double dot = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      d_hidden(k, j) = a * d_pooled(0, j);
      dot += c.hidden(k, j) * d_pooled(0, j);
    }
    d_attention(k, 0) = dot;
  }

  Matrix weights(n, 1, std::vector<double>(result.attention));
  const Matrix d_scores = nn::softmax_cols_backward(weights, d_attention);

  g.attn_w = nn::matmul_tn(c.gated, d_scores);
  g.attn_b = nn::column_sums(d_scores);
  const Matrix d_gated = nn::matmul_nt(d_scores, params.attn_w);  // N×L

  Matrix t = c.attn_t;
  Matrix s = c.attn_s;
  nn::apply_mask(t, c.attn_t_mask);
  nn::apply_mask(s, c.attn_s_mask);
  Matrix d_t = nn::hadamard(d_gated, s);
  Matrix d_s = nn::hadamard(d_gated, t);
  nn::apply_mask(d_t, c.attn_t_mask);
  nn::apply_mask(d_s, c.attn_s_mask);
  const Matrix d_v_pre = nn::tanh_backward(c.attn_t, d_t);
  const Matrix d_u_pre = nn::sigmoid_backward(c.attn_s, d_s);
  g.attn_v_w = nn::matmul_tn(c.input, d_v_pre);
  g.attn_v_b = nn::column_sums(d_v_pre);
  g.attn_u_w = nn::matmul_tn(c.input, d_u_pre);
  g.attn_u_b = nn::column_sums(d_u_pre);

  if (d_instance != nullptr) {
    if (!params.has_instance_classifier()) throw Error("instance gradients given for a head without instance classifier");
    g.inst_w = nn::matmul_tn(c.hidden, *d_instance);
    g.inst_b = nn::column_sums(*d_instance);
    nn::axpy(d_hidden, nn::matmul_nt(*d_instance, params.inst_w));
  }

  nn::apply_mask(d_hidden, c.proj_mask);
  const Matrix d_proj_pre = nn::relu_backward(c.proj_pre, d_hidden);
  g.proj_w = nn::matmul_tn(c.input, d_proj_pre);
  g.proj_b = nn::column_sums(d_proj_pre);
  return g;
}

}  // namespace

BagLoss backward_bag(const BagForwardResult& result, const MilModelParams& params, std::size_t label,
                     double class_weight) {
  auto ce = nn::cross_entropy(result.logits, label);
  for (double& v : ce.grad.values()) v *= class_weight;
  BagLoss out;
  out.bag_loss = class_weight * ce.loss;
  out.loss = out.bag_loss;
  out.grads = backprop(result, params, ce.grad, nullptr);
  return out;
}

ClamSelection select_clam_instances(const std::vector<double>& attention, std::size_t top_k) {
  const std::size_t n = attention.size();
  if (n < 2) throw InputError("instance clustering needs at least 2 instances");
  if (top_k == 0) throw ValidationError("must be >= 1", "clam.B");
  const std::size_t b = std::min(top_k, n / 2);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return attention[i] > attention[j]; });
  ClamSelection sel;
  sel.top.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b));
  sel.bottom.assign(order.end() - static_cast<std::ptrdiff_t>(b), order.end());
  return sel;
}

BagLoss clam_loss(const BagForwardResult& result, const MilModelParams& params, std::size_t label,
                  const ClamConfig& cfg, double class_weight) {
  if (!result.instance_logits) throw Error("clam_loss: head has no instance classifier");
  if (label > 1) throw ValidationError("label must be 0 or 1");
  const double c = cfg.instance_loss_weight;
  if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("must lie in [0, 1]", "clam.instance_loss_weight");

  const ClamSelection sel = select_clam_instances(result.attention, cfg.top_k);
  const Matrix& inst = *result.instance_logits;
  const std::size_t selected = sel.top.size() + sel.bottom.size();

  Matrix d_instance(inst.rows(), 2);
  double inst_loss = 0.0;
  auto accumulate = [&](std::size_t k, std::size_t pseudo) {
    Matrix row(1, 2, {inst(k, 0), inst(k, 1)});
    auto ce = nn::cross_entropy(row, pseudo);
    inst_loss += ce.loss;
    for (std::size_t j = 0; j < 2; ++j) d_instance(k, j) += c * ce.grad(0, j) / static_cast<double>(selected);
  };
  for (std::size_t k : sel.top) accumulate(k, label);
  for (std::size_t k : sel.bottom) accumulate(k, 1 - label);
  inst_loss /= static_cast<double>(selected);

  auto ce = nn::cross_entropy(result.logits, label);
  for (double& v : ce.grad.values()) v *= (1.0 - c) * class_weight;

  BagLoss out;
  out.bag_loss = class_weight * ce.loss;
  out.instance_loss = inst_loss;
  out.loss = (1.0 - c) * out.bag_loss + c * inst_loss;
  out.grads = backprop(result, params, ce.grad, &d_instance);
  return out;
}

double predict_proba(const Matrix& bag, const MilModelParams& params) {
  auto r = forward_bag(bag, params, nn::DropoutSpec::inference(), nullptr, false);
  return nn::softmax_rows(r.logits)(0, kEffective);
}

double ensemble_proba(const Matrix& bag, const std::vector<MilModelParams>& members) {
  if (members.empty()) throw ValidationError("ensemble has no members");
  double total = 0.0;
  for (const auto& m : members) total += predict_proba(bag, m);
  return total / static_cast<double>(members.size());
}

}  // namespace slidemil::mil
