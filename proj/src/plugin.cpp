#include "fewsum/plugin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fewsum {

namespace {
constexpr double kMaskedScore = -1e30;
constexpr double kKlEps = 1e-8;
}

void PluginConfig::validate() const {
  if (n_layers < 1 || n_heads < 1 || d_state < 1 || d_ffn_hidden < 1)
    fail("plugin config: dimensions must be positive");
  if (d_state % n_heads != 0)
    fail("plugin config: d_state " + std::to_string(d_state) + " not divisible by n_heads " +
         std::to_string(n_heads));
  if (n_properties != 9) fail("plugin config: n_properties must be 9");
}

std::vector<TensorSpec> plugin_manifest(const PluginConfig& cfg, int d_model) {
  std::vector<TensorSpec> out;
  out.push_back({"plugin.init_state", 1, cfg.d_state});
  for (int i = 0; i < cfg.n_layers; ++i) {
    std::string p = "plugin.layers." + std::to_string(i);
    out.push_back({p + ".attn.wq", cfg.d_state, cfg.d_state});
    out.push_back({p + ".attn.bq", 1, cfg.d_state});
    out.push_back({p + ".attn.wk", d_model, cfg.d_state});
    out.push_back({p + ".attn.bk", 1, cfg.d_state});
    out.push_back({p + ".attn.wv", d_model, cfg.d_state});
    out.push_back({p + ".attn.bv", 1, cfg.d_state});
    out.push_back({p + ".attn.wo", cfg.d_state, cfg.d_state});
    out.push_back({p + ".attn.bo", 1, cfg.d_state});
    out.push_back({p + ".attn_norm.gain", 1, cfg.d_state});
    out.push_back({p + ".attn_norm.bias", 1, cfg.d_state});
    out.push_back({p + ".ffn.w1", cfg.d_state, cfg.d_ffn_hidden});
    out.push_back({p + ".ffn.b1", 1, cfg.d_ffn_hidden});
    out.push_back({p + ".ffn.w2", cfg.d_ffn_hidden, cfg.d_state});
    out.push_back({p + ".ffn.b2", 1, cfg.d_state});
    out.push_back({p + ".ffn_norm.gain", 1, cfg.d_state});
    out.push_back({p + ".ffn_norm.bias", 1, cfg.d_state});
  }
  out.push_back({"plugin.out_proj.w", cfg.d_state, cfg.n_properties});
  out.push_back({"plugin.out_proj.b", 1, cfg.n_properties});
  return out;
}

PluginParams PluginParams::init(const PluginConfig& cfg, int d_model, Rng& rng) {
  cfg.validate();
  if (d_model < 1) fail("PluginParams::init: d_model must be positive");
  PluginParams p;
  p.cfg = cfg;
  p.d_model = d_model;
  for (const auto& spec : plugin_manifest(cfg, d_model)) {
    Tensor t = Tensor::zeros(spec.rows, spec.cols, /*requires_grad=*/true);
    if (spec.name.ends_with(".gain")) {
      for (auto& v : t.values()) v = 1.0;
    } else if (spec.rows > 1 || spec.name.ends_with("init_state")) {
      double limit = std::sqrt(6.0 / double(spec.rows + spec.cols));
      for (auto& v : t.values()) v = rng.uniform(-limit, limit);
    }
    // biases stay zero
    p.set.add(spec.name, t);
  }
  return p;
}

// Canonical block order: sort whole-source blocks by (length, contents,
// attendability). Identical blocks tie, in which case either order yields the
// same bytes, so the forward value is permutation invariant bit-for-bit.
static std::vector<int> canonical_block_order(const Memory& memory) {
  std::vector<int> order(size_t(memory.n_blocks()));
  std::iota(order.begin(), order.end(), 0);
  auto block_less = [&](int a, int b) {
    if (memory.block_len[size_t(a)] != memory.block_len[size_t(b)])
      return memory.block_len[size_t(a)] < memory.block_len[size_t(b)];
    const int len = memory.block_len[size_t(a)];
    const int d = memory.states.cols();
    const double* pa = memory.states.values().data() + size_t(memory.block_offset[size_t(a)]) * size_t(d);
    const double* pb = memory.states.values().data() + size_t(memory.block_offset[size_t(b)]) * size_t(d);
    for (int i = 0; i < len * d; ++i) {
      if (pa[i] != pb[i]) return pa[i] < pb[i];
    }
    for (int i = 0; i < len; ++i) {
      uint8_t aa = memory.attendable[size_t(memory.block_offset[size_t(a)] + i)];
      uint8_t ab = memory.attendable[size_t(memory.block_offset[size_t(b)] + i)];
      if (aa != ab) return aa < ab;
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), block_less);
  return order;
}

Tensor plugin_forward(const PluginParams& plugin, const Memory& memory, const FwdCtx& ctx) {
  const PluginConfig& cfg = plugin.cfg;
  if (memory.total() == 0) fail("plugin_forward: empty memory");
  if (memory.states.cols() != plugin.d_model)
    fail("plugin_forward: memory width " + std::to_string(memory.states.cols()) +
         " != plugin d_model " + std::to_string(plugin.d_model));
  if (ctx.train && ctx.rng == nullptr) fail("plugin_forward: train mode requires an RNG");

  std::vector<int> perm;
  std::vector<uint8_t> att;
  perm.reserve(size_t(memory.total()));
  for (int b : canonical_block_order(memory)) {
    for (int i = 0; i < memory.block_len[size_t(b)]; ++i) {
      perm.push_back(memory.block_offset[size_t(b)] + i);
      att.push_back(memory.attendable[size_t(memory.block_offset[size_t(b)] + i)]);
    }
  }
  Tensor mem = gather_rows(memory.states, perm);
  Tensor mask = Tensor::zeros(1, int(att.size()));
  for (size_t j = 0; j < att.size(); ++j)
    if (!att[j]) mask.at(0, int(j)) = kMaskedScore;

  const int dh = cfg.d_state / cfg.n_heads;
  const double scl = 1.0 / std::sqrt(double(dh));
  Tensor s = plugin.set.at("plugin.init_state");
  for (int l = 0; l < cfg.n_layers; ++l) {
    std::string p = "plugin.layers." + std::to_string(l);
    Tensor q = add(matmul(s, plugin.set.at(p + ".attn.wq")), plugin.set.at(p + ".attn.bq"));
    Tensor k = add(matmul(mem, plugin.set.at(p + ".attn.wk")), plugin.set.at(p + ".attn.bk"));
    Tensor v = add(matmul(mem, plugin.set.at(p + ".attn.wv")), plugin.set.at(p + ".attn.bv"));
    std::vector<Tensor> heads;
    for (int h = 0; h < cfg.n_heads; ++h) {
      Tensor qh = slice_cols(q, h * dh, dh);
      Tensor kh = slice_cols(k, h * dh, dh);
      Tensor vh = slice_cols(v, h * dh, dh);
      Tensor scores = add(scale(matmul(qh, transpose(kh)), scl), mask);
      Tensor attn = softmax_rows(scores);
      if (ctx.train && cfg.dropout_attention > 0.0)
        attn = dropout(attn, cfg.dropout_attention, *ctx.rng, true);
      heads.push_back(matmul(attn, vh));
    }
    Tensor pooled = add(matmul(concat_cols(heads), plugin.set.at(p + ".attn.wo")),
                        plugin.set.at(p + ".attn.bo"));
    if (ctx.train) pooled = dropout(pooled, cfg.dropout_internal, *ctx.rng, true);
    s = layer_norm_rows(add(s, pooled), plugin.set.at(p + ".attn_norm.gain"),
                        plugin.set.at(p + ".attn_norm.bias"));
    Tensor hidden = relu(add(matmul(s, plugin.set.at(p + ".ffn.w1")), plugin.set.at(p + ".ffn.b1")));
    if (ctx.train) hidden = dropout(hidden, cfg.dropout_internal, *ctx.rng, true);
    Tensor ff = add(matmul(hidden, plugin.set.at(p + ".ffn.w2")), plugin.set.at(p + ".ffn.b2"));
    s = layer_norm_rows(add(s, ff), plugin.set.at(p + ".ffn_norm.gain"),
                        plugin.set.at(p + ".ffn_norm.bias"));
  }
  Tensor raw = add(matmul(s, plugin.set.at("plugin.out_proj.w")),
                   plugin.set.at("plugin.out_proj.b"));
  return concat_cols({sigmoid(slice_cols(raw, 0, 3)), softmax_rows(slice_cols(raw, 3, 4)),
                      slice_cols(raw, 7, 2)});
}

Tensor plugin_distance(const Tensor& pred, const PropertyVector& target,
                       const DistanceWeights& w) {
  if (!pred.defined() || pred.rows() != 1 || pred.cols() != kNumProperties)
    fail("plugin_distance: prediction must be 1x9");
  if (w.w_len_dev < 0 || w.w_rating_dev < 0 || w.w_pov < 0 || w.w_coverage < 0)
    fail("plugin_distance: weights must be non-negative");
  Tensor cov_t = Tensor::row({target.v[0], target.v[1], target.v[2]});
  Tensor cov_l1 = sum_all(abs_elem(sub(slice_cols(pred, 0, 3), cov_t)));
  Tensor rating_l1 =
      sum_all(abs_elem(sub(slice_cols(pred, 7, 1), Tensor::row({target.v[7]}))));
  Tensor len_l1 = sum_all(abs_elem(sub(slice_cols(pred, 8, 1), Tensor::row({target.v[8]}))));
  // KL(t || p) = sum t ln(t + eps) - sum t ln(p + eps); the first term is a
  // constant added outside the graph.
  Tensor pov_t = Tensor::row({target.v[3], target.v[4], target.v[5], target.v[6]});
  double const_term = 0.0;
  for (int j = 3; j <= 6; ++j)
    const_term += target.v[size_t(j)] * std::log(target.v[size_t(j)] + kKlEps);
  Tensor cross = sum_all(mul(pov_t, log_elem(add_scalar(slice_cols(pred, 3, 4), kKlEps))));
  Tensor kl = add_scalar(scale(cross, -1.0), const_term);
  Tensor loss = scale(cov_l1, w.w_coverage);
  loss = add(loss, scale(rating_l1, w.w_rating_dev));
  loss = add(loss, scale(len_l1, w.w_len_dev));
  loss = add(loss, scale(kl, w.w_pov));
  return loss;
}

double plugin_model_ratio(const PluginParams& plugin, const ModelParams& model) {
  return double(plugin.param_count()) / double(model.param_count());
}

}  // namespace fewsum
