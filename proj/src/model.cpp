#include "fewsum/model.hpp"

#include <array>
#include <cmath>

namespace fewsum {

namespace {
constexpr double kMaskedScore = -1e30;
}

void ModelConfig::validate() const {
  if (n_layers < 1) fail("config: n_layers must be >= 1");
  if (n_heads < 1) fail("config: n_heads must be >= 1");
  if (d_model() % n_heads != 0)
    fail("config: d_model " + std::to_string(d_model()) + " not divisible by n_heads " +
         std::to_string(n_heads));
  if (vocab_size <= kNumSpecials) fail("config: vocab_size too small");
  if (max_len < 2) fail("config: max_len must be >= 2");
  if (dropout_sublayer < 0 || dropout_sublayer >= 1 || dropout_emb < 0 || dropout_emb >= 1)
    fail("config: dropout rates must lie in [0, 1)");
  if (n_properties != 9) fail("config: n_properties must be 9");
}

ModelConfig ModelConfig::paper_preset() {
  ModelConfig c;
  c.n_layers = 6;
  c.n_heads = 8;
  c.d_subword = 390;
  c.d_len = 10;
  c.d_ffn = 1000;
  c.vocab_size = 32000;
  c.dropout_sublayer = 0.1;
  c.dropout_emb = 0.1;
  c.max_len = 512;
  return c;
}

ModelConfig ModelConfig::desk_preset() {
  ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_subword = 60;
  c.d_len = 4;
  c.d_ffn = 128;
  c.vocab_size = 600;
  c.dropout_sublayer = 0.1;
  c.dropout_emb = 0.1;
  c.max_len = 128;
  return c;
}

int64_t manifest_param_count(const std::vector<TensorSpec>& manifest) {
  int64_t total = 0;
  for (const auto& s : manifest) total += int64_t(s.rows) * int64_t(s.cols);
  return total;
}

void ParamSet::add(const std::string& name, Tensor t) {
  if (index_.count(name)) fail("ParamSet: duplicate tensor " + name);
  order_.push_back(name);
  index_.emplace(name, std::move(t));
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) fail("ParamSet: no tensor named " + name);
  return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail("ParamSet: no tensor named " + name);
  return it->second;
}

int64_t ParamSet::param_count() const {
  int64_t total = 0;
  for (const auto& n : order_) total += int64_t(index_.at(n).size());
  return total;
}

void ParamSet::zero_grad() {
  for (const auto& n : order_) index_.at(n).zero_grad();
}

static void attention_specs(std::vector<TensorSpec>& out, const std::string& prefix, int d_q,
                            int d_kv, int d_state) {
  out.push_back({prefix + ".wq", d_q, d_state});
  out.push_back({prefix + ".bq", 1, d_state});
  out.push_back({prefix + ".wk", d_kv, d_state});
  out.push_back({prefix + ".bk", 1, d_state});
  out.push_back({prefix + ".wv", d_kv, d_state});
  out.push_back({prefix + ".bv", 1, d_state});
  out.push_back({prefix + ".wo", d_state, d_state});
  out.push_back({prefix + ".bo", 1, d_state});
}

static void norm_specs(std::vector<TensorSpec>& out, const std::string& prefix, int d) {
  out.push_back({prefix + ".gain", 1, d});
  out.push_back({prefix + ".bias", 1, d});
}

std::vector<TensorSpec> model_manifest(const ModelConfig& cfg, bool with_task_embedding) {
  const int d = cfg.d_model();
  std::vector<TensorSpec> out;
  out.push_back({"model.subword_emb", cfg.vocab_size, cfg.d_subword});
  out.push_back({"model.length_emb", cfg.max_len, cfg.d_len});
  out.push_back({"model.prop_proj.w", d + cfg.n_properties, d});
  out.push_back({"model.prop_proj.b", 1, d});
  out.push_back({"model.out_head.w", d, cfg.d_subword});
  out.push_back({"model.out_bias", 1, cfg.vocab_size});
  for (int i = 0; i < cfg.n_layers; ++i) {
    std::string p = "model.layers." + std::to_string(i);
    attention_specs(out, p + ".self_attn", d, d, d);
    norm_specs(out, p + ".self_norm", d);
    attention_specs(out, p + ".cross_attn", d, d, d);
    norm_specs(out, p + ".cross_norm", d);
    out.push_back({p + ".ffn.w1", d, cfg.d_ffn});
    out.push_back({p + ".ffn.b1", 1, cfg.d_ffn});
    out.push_back({p + ".ffn.w2", cfg.d_ffn, d});
    out.push_back({p + ".ffn.b2", 1, d});
    norm_specs(out, p + ".ffn_norm", d);
  }
  if (with_task_embedding) out.push_back({"model.task_emb", 2, d});
  return out;
}

// Glorot-uniform weights; zero biases; unit layer-norm gains.
static Tensor init_tensor(const TensorSpec& spec, Rng& rng) {
  Tensor t = Tensor::zeros(spec.rows, spec.cols, /*requires_grad=*/true);
  bool is_bias = spec.rows == 1;
  bool is_gain = spec.name.size() >= 5 && spec.name.ends_with(".gain");
  if (is_gain) {
    for (auto& v : t.values()) v = 1.0;
  } else if (!is_bias) {
    double limit = std::sqrt(6.0 / double(spec.rows + spec.cols));
    for (auto& v : t.values()) v = rng.uniform(-limit, limit);
  }
  return t;
}

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng, bool with_task_embedding) {
  cfg.validate();
  ModelParams p;
  p.cfg = cfg;
  for (const auto& spec : model_manifest(cfg, with_task_embedding))
    p.set.add(spec.name, init_tensor(spec, rng));
  return p;
}

// ---------------------------------------------------------------------------
// Attention and transformer blocks
// ---------------------------------------------------------------------------

namespace {

struct AttnRef {
  const Tensor &wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo;
};

AttnRef attn_ref(const ParamSet& set, const std::string& prefix) {
  return {set.at(prefix + ".wq"), set.at(prefix + ".bq"), set.at(prefix + ".wk"),
          set.at(prefix + ".bk"), set.at(prefix + ".wv"), set.at(prefix + ".bv"),
          set.at(prefix + ".wo"), set.at(prefix + ".bo")};
}

// mask may be undefined; otherwise an additive [Tq, Tk] tensor.
Tensor multi_head_attention(const AttnRef& w, int n_heads, const Tensor& queries_in,
                            const Tensor& keys_in, const Tensor& mask, const FwdCtx& ctx,
                            double attn_dropout) {
  Tensor q = add(matmul(queries_in, w.wq), w.bq);
  Tensor k = add(matmul(keys_in, w.wk), w.bk);
  Tensor v = add(matmul(keys_in, w.wv), w.bv);
  const int d_state = q.cols();
  const int dh = d_state / n_heads;
  const double scl = 1.0 / std::sqrt(double(dh));
  std::vector<Tensor> heads;
  heads.reserve(size_t(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), scl);
    if (mask.defined()) scores = add(scores, mask);
    Tensor attn = softmax_rows(scores);
    if (attn_dropout > 0.0 && ctx.train) attn = dropout(attn, attn_dropout, *ctx.rng, true);
    heads.push_back(matmul(attn, vh));
  }
  return add(matmul(concat_cols(heads), w.wo), w.bo);
}

Tensor sublayer(const Tensor& x, const Tensor& inner, const ParamSet& set,
                const std::string& norm_prefix, double drop_rate, const FwdCtx& ctx) {
  Tensor dropped = ctx.train ? dropout(inner, drop_rate, *ctx.rng, true) : inner;
  return layer_norm_rows(add(x, dropped), set.at(norm_prefix + ".gain"),
                         set.at(norm_prefix + ".bias"));
}

Tensor ffn_block(const ParamSet& set, const std::string& prefix, const Tensor& x) {
  Tensor h = relu(add(matmul(x, set.at(prefix + ".w1")), set.at(prefix + ".b1")));
  return add(matmul(h, set.at(prefix + ".w2")), set.at(prefix + ".b2"));
}

Tensor causal_mask(int t) {
  Tensor m = Tensor::zeros(t, t);
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) m.at(i, j) = kMaskedScore;
  return m;
}

Tensor pad_col_mask(int rows, const std::vector<uint8_t>& attendable) {
  Tensor m = Tensor::zeros(rows, int(attendable.size()));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < int(attendable.size()); ++j)
      if (!attendable[size_t(j)]) m.at(i, j) = kMaskedScore;
  return m;
}

std::vector<int> positions(int t) {
  std::vector<int> out(size_t(t));
  for (int i = 0; i < t; ++i) out[size_t(i)] = i;
  return out;
}

}  // namespace

Memory encode_sources(const ModelParams& params, const std::vector<TokenSeq>& sources,
                      const FwdCtx& ctx) {
  const ModelConfig& cfg = params.cfg;
  if (sources.empty()) fail("encode_sources: no sources");
  if (ctx.train && ctx.rng == nullptr) fail("encode_sources: train mode requires an RNG");
  Memory mem;
  std::vector<Tensor> blocks;
  int offset = 0;
  for (const auto& src : sources) {
    const int t = int(src.ids.size());
    if (t == 0) fail("encode_sources: empty source sequence");
    if (t > cfg.max_len)
      fail("encode_sources: source length " + std::to_string(t) + " exceeds max_len " +
           std::to_string(cfg.max_len) + " (caller must truncate)");
    std::vector<uint8_t> att(size_t(t));
    for (int i = 0; i < t; ++i) att[size_t(i)] = src.ids[size_t(i)] != PAD;
    Tensor emb = concat_cols({gather_rows(params.set.at("model.subword_emb"), src.ids),
                              gather_rows(params.set.at("model.length_emb"), positions(t))});
    Tensor x = ctx.train ? dropout(emb, cfg.dropout_emb, *ctx.rng, true) : emb;
    Tensor self_mask = pad_col_mask(t, att);
    for (int l = 0; l < cfg.n_layers; ++l) {
      std::string p = "model.layers." + std::to_string(l);
      Tensor attn = multi_head_attention(attn_ref(params.set, p + ".self_attn"), cfg.n_heads, x,
                                         x, self_mask, ctx, 0.0);
      x = sublayer(x, attn, params.set, p + ".self_norm", cfg.dropout_sublayer, ctx);
      // Cross-attention is generator-only; the encoder skips that sublayer.
      Tensor ff = ffn_block(params.set, p + ".ffn", x);
      x = sublayer(x, ff, params.set, p + ".ffn_norm", cfg.dropout_sublayer, ctx);
    }
    blocks.push_back(x);
    mem.block_offset.push_back(offset);
    mem.block_len.push_back(t);
    offset += t;
    mem.attendable.insert(mem.attendable.end(), att.begin(), att.end());
  }
  mem.states = concat_rows(blocks);
  return mem;
}

Tensor generator_forward(const ModelParams& params, const std::vector<int>& input_ids,
                         const Memory* memory, const Tensor& props, const FwdCtx& ctx,
                         const Tensor& task_row) {
  const ModelConfig& cfg = params.cfg;
  const int t = int(input_ids.size());
  if (t == 0) fail("generator_forward: empty input");
  if (t > cfg.max_len)
    fail("generator_forward: length " + std::to_string(t) + " exceeds max_len " +
         std::to_string(cfg.max_len));
  if (!props.defined() || props.rows() != 1 || props.cols() != cfg.n_properties)
    fail("generator_forward: property vector must be 1x" + std::to_string(cfg.n_properties));
  if (ctx.train && ctx.rng == nullptr) fail("generator_forward: train mode requires an RNG");
  const int d = cfg.d_model();

  Tensor emb = concat_cols({gather_rows(params.set.at("model.subword_emb"), input_ids),
                            gather_rows(params.set.at("model.length_emb"), positions(t))});
  // concat(emb, props) @ W == emb @ W_top + props @ W_bottom; the split keeps
  // the per-step property broadcast out of the graph.
  const Tensor& pw = params.set.at("model.prop_proj.w");
  std::vector<int> top_ids = positions(d);
  std::vector<int> bottom_ids(size_t(cfg.n_properties));
  for (int i = 0; i < cfg.n_properties; ++i) bottom_ids[size_t(i)] = d + i;
  Tensor x = add(matmul(emb, gather_rows(pw, top_ids)),
                 matmul(props, gather_rows(pw, bottom_ids)));
  x = add(x, params.set.at("model.prop_proj.b"));
  if (task_row.defined()) x = add(x, task_row);
  if (ctx.train) x = dropout(x, cfg.dropout_emb, *ctx.rng, true);

  Tensor self_mask = causal_mask(t);
  Tensor cross_mask;
  if (memory != nullptr) cross_mask = pad_col_mask(t, memory->attendable);
  for (int l = 0; l < cfg.n_layers; ++l) {
    std::string p = "model.layers." + std::to_string(l);
    Tensor attn = multi_head_attention(attn_ref(params.set, p + ".self_attn"), cfg.n_heads, x, x,
                                       self_mask, ctx, 0.0);
    x = sublayer(x, attn, params.set, p + ".self_norm", cfg.dropout_sublayer, ctx);
    if (memory != nullptr) {
      Tensor cross = multi_head_attention(attn_ref(params.set, p + ".cross_attn"), cfg.n_heads,
                                          x, memory->states, cross_mask, ctx, 0.0);
      x = sublayer(x, cross, params.set, p + ".cross_norm", cfg.dropout_sublayer, ctx);
    }
    Tensor ff = ffn_block(params.set, p + ".ffn", x);
    x = sublayer(x, ff, params.set, p + ".ffn_norm", cfg.dropout_sublayer, ctx);
  }
  Tensor head = matmul(x, params.set.at("model.out_head.w"));
  return add(matmul(head, transpose(params.set.at("model.subword_emb"))),
             params.set.at("model.out_bias"));
}

SourceVocabMask SourceVocabMask::from_sources(const std::vector<TokenSeq>& sources,
                                              int vocab_size) {
  SourceVocabMask m;
  m.in_source.assign(size_t(vocab_size), 0);
  for (const auto& s : sources)
    for (int id : s.ids)
      if (id >= 0 && id < vocab_size) m.in_source[size_t(id)] = 1;
  for (int i = 0; i < kNumSpecials && i < vocab_size; ++i) m.in_source[size_t(i)] = 0;
  return m;
}

Tensor loo_loss(const ModelParams& params, const TokenSeq& target, const Memory* memory,
                const Tensor& props, const FwdCtx& ctx, const Tensor& task_row) {
  if (target.ids.size() < 2) fail("loo_loss: target must have BOS plus at least one token");
  bool any_real = false;
  for (int id : target.ids) any_real = any_real || id != PAD;
  if (!any_real) fail("loo_loss: all-PAD target");
  std::vector<int> inputs(target.ids.begin(), target.ids.end() - 1);
  std::vector<int> labels(target.ids.begin() + 1, target.ids.end());
  for (auto& l : labels)
    if (l == PAD) l = -1;
  Tensor logits = generator_forward(params, inputs, memory, props, ctx, task_row);
  return cross_entropy_mean(logits, labels);
}

Tensor novelty_penalty(const Tensor& logits, const SourceVocabMask& mask) {
  if (int(mask.in_source.size()) != logits.cols())
    fail("novelty_penalty: mask length " + std::to_string(mask.in_source.size()) +
         " != vocab size " + std::to_string(logits.cols()));
  std::vector<double> out_of_source(mask.in_source.size());
  for (size_t i = 0; i < mask.in_source.size(); ++i)
    out_of_source[i] = mask.in_source[i] ? 0.0 : 1.0;
  return sum_all(mul(softmax_rows(logits), Tensor::row(out_of_source)));
}

Tensor props_tensor(const std::array<double, 9>& v) {
  return Tensor::row(std::vector<double>(v.begin(), v.end()));
}

Tensor zero_props() { return Tensor::zeros(1, 9); }

}  // namespace fewsum
