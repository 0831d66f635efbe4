#include "fewsum/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "fewsum/checkpoint.hpp"
#include "json.hpp"

namespace fewsum {

using nlohmann::json;

std::string stage_name(StageKind kind) {
  switch (kind) {
    case StageKind::kPretrainLm: return "pretrain_lm";
    case StageKind::kTrainLoo: return "train_loo";
    case StageKind::kNoveltyPhase: return "novelty_phase";
    case StageKind::kPluginInit: return "plugin_init";
    case StageKind::kPluginFinetune: return "plugin_finetune";
    case StageKind::kJointFinetune: return "joint_finetune";
    case StageKind::kUslFinetune: return "usl_finetune";
    case StageKind::kMtl: return "mtl";
  }
  return "?";
}

StageKind stage_from_name(const std::string& name) {
  for (StageKind k :
       {StageKind::kPretrainLm, StageKind::kTrainLoo, StageKind::kNoveltyPhase,
        StageKind::kPluginInit, StageKind::kPluginFinetune, StageKind::kJointFinetune,
        StageKind::kUslFinetune, StageKind::kMtl})
    if (stage_name(k) == name) return k;
  fail("unknown stage name: " + name);
}

void StageConfig::validate() const {
  if (lr <= 0.0) fail("stage " + stage_name(kind) + ": learning rate must be positive");
  if (steps < 0) fail("stage " + stage_name(kind) + ": steps must be >= 0");
  if (batch_size < 1) fail("stage " + stage_name(kind) + ": batch_size must be >= 1");
  if (lambda < 0.0) fail("stage " + stage_name(kind) + ": lambda must be >= 0");
  if (mix_reviews < 1 || mix_summaries < 1)
    fail("stage " + stage_name(kind) + ": mixing ratio terms must be >= 1");
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

void adam_step(const NamedTensors& trainables, AdamState& state, double lr,
               const AdamConfig& cfg) {
  ++state.step;
  double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (const auto& [name, t] : trainables) {
    auto node = t.node();
    if (node->grad.size() != node->size()) node->grad.assign(node->size(), 0.0);
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != node->size()) m.assign(node->size(), 0.0);
    if (v.size() != node->size()) v.assign(node->size(), 0.0);
    for (size_t i = 0; i < node->size(); ++i) {
      double g = node->grad[i];
      if (!std::isfinite(g)) fail("adam_step: non-finite gradient in tensor " + name);
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      node->value[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double clip_global_norm(const NamedTensors& trainables, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : trainables) {
    for (double g : t.node()->grad) {
      if (!std::isfinite(g)) fail("clip_global_norm: non-finite gradient in tensor " + name);
      sq += g * g;
    }
  }
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    double s = max_norm / norm;
    for (const auto& [name, t] : trainables)
      for (double& g : t.node()->grad) g *= s;
  }
  return norm;
}

bool name_matches(const std::string& name, const std::string& pattern) {
  // Glob with '*' only.
  size_t n = name.size(), p = pattern.size();
  std::vector<std::vector<int>> memo(n + 1, std::vector<int>(p + 1, -1));
  std::function<bool(size_t, size_t)> go = [&](size_t i, size_t j) -> bool {
    int& slot = memo[i][j];
    if (slot >= 0) return slot == 1;
    bool res;
    if (j == p) {
      res = i == n;
    } else if (pattern[j] == '*') {
      res = go(i, j + 1) || (i < n && go(i + 1, j));
    } else {
      res = i < n && name[i] == pattern[j] && go(i + 1, j + 1);
    }
    slot = res ? 1 : 0;
    return res;
  };
  return go(0, 0);
}

// ---------------------------------------------------------------------------
// Data preparation
// ---------------------------------------------------------------------------

TokenSeq truncate_target(TokenSeq seq, int max_len) {
  if (int(seq.ids.size()) <= max_len) return seq;
  seq.ids.resize(size_t(max_len));
  seq.ids.back() = EOS;
  return TokenSeq::from_ids(std::move(seq.ids));
}

static TokenSeq truncate_source(TokenSeq seq, int max_len) {
  if (int(seq.ids.size()) > max_len) {
    seq.ids.resize(size_t(max_len));
    seq = TokenSeq::from_ids(std::move(seq.ids));
  }
  return seq;
}

static TokenizedInstance tokenize_one(const LooInstance& inst, const BpeModel& bpe,
                                      const ModelConfig& cfg, const OracleConfig& oracle_cfg,
                                      bool use_oracle) {
  TokenizedInstance out;
  out.group_id = inst.group_id;
  out.target = truncate_target(bpe.encode(inst.target.text, /*add_bos_eos=*/true), cfg.max_len);
  for (const auto& s : inst.sources)
    out.sources.push_back(truncate_source(bpe.encode(s.text, false), cfg.max_len));
  if (use_oracle) out.props = compute_properties(inst, oracle_cfg);
  out.mask = SourceVocabMask::from_sources(out.sources, cfg.vocab_size);
  return out;
}

std::vector<TokenizedInstance> tokenize_groups(const std::vector<ReviewGroup>& groups,
                                               const BpeModel& bpe, const ModelConfig& cfg,
                                               const OracleConfig& oracle_cfg, bool use_oracle) {
  std::vector<TokenizedInstance> out;
  for (const auto& g : groups)
    for (const auto& inst : leave_one_out(g))
      out.push_back(tokenize_one(inst, bpe, cfg, oracle_cfg, use_oracle));
  return out;
}

std::vector<TokenizedInstance> tokenize_summary_pairs(const AnnotatedSet& annotated, Split split,
                                                      const BpeModel& bpe, const ModelConfig& cfg,
                                                      const OracleConfig& oracle_cfg,
                                                      bool use_oracle) {
  OracleConfig summary_cfg = oracle_cfg;
  summary_cfg.zero_rating_dev = true;  // summaries carry no rating
  std::vector<TokenizedInstance> out;
  for (const auto* e : annotated.in_split(split)) {
    for (const auto& ref : e->references) {
      LooInstance pseudo;
      pseudo.group_id = e->group_id;
      pseudo.sources = e->sources;
      pseudo.target.id = e->group_id + "#summary";
      pseudo.target.product_id = e->group_id;
      pseudo.target.rating = 5;  // unused: rating deviation is zeroed
      pseudo.target.text = ref;
      out.push_back(tokenize_one(pseudo, bpe, cfg, summary_cfg, use_oracle));
    }
  }
  return out;
}

std::vector<TokenSeq> tokenize_lm_corpus(const std::vector<Review>& reviews, const BpeModel& bpe,
                                         const ModelConfig& cfg) {
  std::vector<TokenSeq> out;
  for (const auto& r : reviews)
    out.push_back(truncate_target(bpe.encode(r.text, true), cfg.max_len));
  return out;
}

// ---------------------------------------------------------------------------
// Stage runner
// ---------------------------------------------------------------------------

namespace {

bool uses_plugin(StageKind k) {
  return k == StageKind::kPluginInit || k == StageKind::kPluginFinetune ||
         k == StageKind::kJointFinetune;
}

bool summary_stage(StageKind k) {
  return k == StageKind::kPluginFinetune || k == StageKind::kJointFinetune ||
         k == StageKind::kUslFinetune;
}

NamedTensors stage_trainables(StageKind kind, ModelParams& model, PluginParams* plugin,
                              const std::vector<std::string>& extra_frozen) {
  NamedTensors out;
  auto add_set = [&](ParamSet& set, auto keep) {
    for (const auto& name : set.names())
      if (keep(name)) out.emplace_back(name, set.at(name));
  };
  switch (kind) {
    case StageKind::kPretrainLm:
    case StageKind::kTrainLoo:
    case StageKind::kNoveltyPhase:
    case StageKind::kUslFinetune:
    case StageKind::kMtl:
      add_set(model.set, [](const std::string&) { return true; });
      break;
    case StageKind::kPluginInit:
    case StageKind::kPluginFinetune:
      if (plugin == nullptr) fail("stage requires plugin parameters");
      add_set(plugin->set, [](const std::string&) { return true; });
      break;
    case StageKind::kJointFinetune:
      // The generator's attention over input reviews (cross-attention
      // projections plus their layer norms) and the whole plug-in.
      if (plugin == nullptr) fail("joint_finetune requires plugin parameters");
      add_set(model.set, [](const std::string& n) {
        return n.find(".cross_attn.") != std::string::npos ||
               n.find(".cross_norm.") != std::string::npos;
      });
      add_set(plugin->set, [](const std::string&) { return true; });
      break;
  }
  if (!extra_frozen.empty()) {
    NamedTensors kept;
    for (auto& [name, t] : out) {
      bool frozen = false;
      for (const auto& pat : extra_frozen) frozen = frozen || name_matches(name, pat);
      if (!frozen) kept.emplace_back(name, t);
    }
    out = std::move(kept);
  }
  return out;
}

// Loss graph for one data item of the stage. train=true applies dropout and
// builds gradients; eval mode runs under a NoGradGuard at the call site.
Tensor instance_loss(const StageConfig& cfg, const StageData& data, size_t index,
                     const ModelParams& model, const PluginParams* plugin, const FwdCtx& ctx) {
  switch (cfg.kind) {
    case StageKind::kPretrainLm: {
      const TokenSeq& t = data.lm_targets[index];
      std::vector<int> inputs(t.ids.begin(), t.ids.end() - 1);
      std::vector<int> labels(t.ids.begin() + 1, t.ids.end());
      Tensor logits = generator_forward(model, inputs, nullptr, zero_props(), ctx);
      return cross_entropy_mean(logits, labels);
    }
    case StageKind::kTrainLoo: {
      const TokenizedInstance& inst = data.loo[index];
      Memory mem = encode_sources(model, inst.sources, ctx);
      return loo_loss(model, inst.target, &mem, props_tensor(inst.props.v), ctx);
    }
    case StageKind::kNoveltyPhase: {
      const TokenizedInstance& inst = data.loo[index];
      Memory mem = encode_sources(model, inst.sources, ctx);
      std::vector<int> inputs(inst.target.ids.begin(), inst.target.ids.end() - 1);
      std::vector<int> labels(inst.target.ids.begin() + 1, inst.target.ids.end());
      for (auto& l : labels)
        if (l == PAD) l = -1;
      Tensor logits = generator_forward(model, inputs, &mem, props_tensor(inst.props.v), ctx);
      Tensor nll = cross_entropy_mean(logits, labels);
      if (cfg.lambda == 0.0) return nll;
      Tensor pen = novelty_penalty(logits, inst.mask);
      return add(nll, scale(pen, cfg.lambda / double(labels.size())));
    }
    case StageKind::kPluginInit:
    case StageKind::kPluginFinetune: {
      const auto& pool = cfg.kind == StageKind::kPluginInit ? data.loo : data.summaries;
      const TokenizedInstance& inst = pool[index];
      Memory mem;
      {
        NoGradGuard ng;  // encoder is shared with the main model and frozen here
        FwdCtx eval_ctx;
        mem = encode_sources(model, inst.sources, eval_ctx);
      }
      Tensor pred = plugin_forward(*plugin, mem, ctx);
      return plugin_distance(pred, inst.props, cfg.distance_weights);
    }
    case StageKind::kJointFinetune: {
      const TokenizedInstance& inst = data.summaries[index];
      Memory mem;
      {
        NoGradGuard ng;  // encoder output depends only on frozen tensors
        FwdCtx eval_ctx;
        mem = encode_sources(model, inst.sources, eval_ctx);
      }
      Tensor props = plugin_forward(*plugin, mem, ctx);
      return loo_loss(model, inst.target, &mem, props, ctx);
    }
    case StageKind::kUslFinetune: {
      const TokenizedInstance& inst = data.summaries[index];
      Memory mem = encode_sources(model, inst.sources, ctx);
      return loo_loss(model, inst.target, &mem, zero_props(), ctx);
    }
    case StageKind::kMtl: {
      fail("instance_loss: MTL batches are built by the runner");
    }
  }
  fail("instance_loss: unhandled stage");
}

Tensor mtl_instance_loss(const StageData& data, bool review_task, size_t index,
                         const ModelParams& model, const FwdCtx& ctx) {
  const TokenizedInstance& inst = review_task ? data.loo[index] : data.summaries[index];
  Memory mem = encode_sources(model, inst.sources, ctx);
  Tensor task_row = gather_rows(model.set.at("model.task_emb"), {review_task ? 0 : 1});
  return loo_loss(model, inst.target, &mem, zero_props(), ctx, task_row);
}

size_t stage_pool_size(const StageConfig& cfg, const StageData& data) {
  switch (cfg.kind) {
    case StageKind::kPretrainLm: return data.lm_targets.size();
    case StageKind::kTrainLoo:
    case StageKind::kNoveltyPhase:
    case StageKind::kPluginInit: return data.loo.size();
    case StageKind::kPluginFinetune:
    case StageKind::kJointFinetune:
    case StageKind::kUslFinetune: return data.summaries.size();
    case StageKind::kMtl: return std::min(data.loo.size(), data.summaries.size());
  }
  return 0;
}

}  // namespace

double stage_eval_loss(const StageConfig& cfg, const StageData& data, const ModelParams& model,
                       const PluginParams* plugin, int max_n) {
  NoGradGuard ng;
  FwdCtx ctx;  // eval mode
  double total = 0.0;
  int used = 0;
  if (cfg.kind == StageKind::kMtl) {
    size_t n = std::min(size_t(max_n), std::min(data.loo.size(), data.summaries.size()));
    for (size_t i = 0; i < n; ++i) {
      total += mtl_instance_loss(data, true, i, model, ctx).scalar();
      total += mtl_instance_loss(data, false, i, model, ctx).scalar();
      used += 2;
    }
  } else {
    size_t n = std::min(size_t(max_n), stage_pool_size(cfg, data));
    for (size_t i = 0; i < n; ++i) {
      total += instance_loss(cfg, data, i, model, plugin, ctx).scalar();
      ++used;
    }
  }
  if (used == 0) fail("stage_eval_loss: no data for stage " + stage_name(cfg.kind));
  return total / double(used);
}

TrainLog run_stage(const StageConfig& cfg, const StageData& data, ModelParams& model,
                   PluginParams* plugin, TrainerState& state, std::ostream* log_stream) {
  cfg.validate();
  if (uses_plugin(cfg.kind) && plugin == nullptr)
    fail("run_stage: stage " + stage_name(cfg.kind) + " requires plugin parameters");
  if (cfg.kind == StageKind::kMtl && !model.has_task_embedding())
    fail("run_stage: mtl requires a model with a task embedding");
  size_t pool = stage_pool_size(cfg, data);
  if (pool == 0 && cfg.steps > 0) fail("run_stage: no data for stage " + stage_name(cfg.kind));

  NamedTensors trainables = stage_trainables(cfg.kind, model, plugin, cfg.frozen_patterns);
  if (trainables.empty()) fail("run_stage: nothing to train in stage " + stage_name(cfg.kind));

  TrainLog log;
  log.initial_eval_loss = stage_eval_loss(cfg, data, model, plugin, 64);

  FwdCtx ctx{/*train=*/true, &state.rng};
  const int cycle = cfg.mix_reviews + cfg.mix_summaries;
  for (; state.step < cfg.steps; ++state.step) {
    for (auto& [name, t] : trainables) t.zero_grad();
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      Tensor loss;
      if (cfg.kind == StageKind::kMtl) {
        bool review_task = (state.step % cycle) < cfg.mix_reviews;
        size_t n = review_task ? data.loo.size() : data.summaries.size();
        size_t idx = size_t(state.rng.next_int(int(n)));
        loss = mtl_instance_loss(data, review_task, idx, model, ctx);
      } else {
        size_t idx = size_t(state.rng.next_int(int(pool)));
        loss = instance_loss(cfg, data, idx, model, plugin, ctx);
      }
      double val = loss.scalar();
      if (!std::isfinite(val))
        fail("stage " + stage_name(cfg.kind) + " aborted at step " + std::to_string(state.step) +
             ": non-finite loss");
      batch_loss += val;
      backward(scale(loss, 1.0 / double(cfg.batch_size)));
    }
    batch_loss /= double(cfg.batch_size);
    clip_global_norm(trainables, cfg.clip_norm);
    adam_step(trainables, state.adam, cfg.lr);
    log.step_losses.emplace_back(state.step, batch_loss);
    if (log_stream && (state.step % cfg.log_every == 0 || state.step + 1 == cfg.steps))
      (*log_stream) << "stage=" << stage_name(cfg.kind) << " step=" << state.step
                    << " loss=" << batch_loss << " lr=" << cfg.lr << "\n";
  }
  log.final_eval_loss = stage_eval_loss(cfg, data, model, plugin, 64);
  return log;
}

double mean_out_of_source_mass(const ModelParams& model,
                               const std::vector<TokenizedInstance>& instances, int max_n) {
  NoGradGuard ng;
  FwdCtx ctx;
  double total = 0.0;
  int used = 0;
  size_t n = std::min(size_t(max_n), instances.size());
  if (n == 0) fail("mean_out_of_source_mass: no instances");
  for (size_t i = 0; i < n; ++i) {
    const TokenizedInstance& inst = instances[i];
    Memory mem = encode_sources(model, inst.sources, ctx);
    std::vector<int> inputs(inst.target.ids.begin(), inst.target.ids.end() - 1);
    Tensor logits = generator_forward(model, inputs, &mem, props_tensor(inst.props.v), ctx);
    total += novelty_penalty(logits, inst.mask).scalar() / double(inputs.size());
    ++used;
  }
  return total / double(used);
}

// ---------------------------------------------------------------------------
// Config serialization and checkpoints
// ---------------------------------------------------------------------------

std::string model_config_json(const ModelConfig& cfg) {
  json j{{"n_layers", cfg.n_layers},
         {"n_heads", cfg.n_heads},
         {"d_subword", cfg.d_subword},
         {"d_len", cfg.d_len},
         {"d_ffn", cfg.d_ffn},
         {"vocab_size", cfg.vocab_size},
         {"dropout_sublayer", cfg.dropout_sublayer},
         {"dropout_emb", cfg.dropout_emb},
         {"n_properties", cfg.n_properties},
         {"max_len", cfg.max_len}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig cfg;
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.d_subword = j.at("d_subword").get<int>();
  cfg.d_len = j.at("d_len").get<int>();
  cfg.d_ffn = j.at("d_ffn").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.dropout_sublayer = j.at("dropout_sublayer").get<double>();
  cfg.dropout_emb = j.at("dropout_emb").get<double>();
  cfg.n_properties = j.at("n_properties").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  return cfg;
}

std::string plugin_config_json(const PluginConfig& cfg) {
  json j{{"n_layers", cfg.n_layers},
         {"n_heads", cfg.n_heads},
         {"d_state", cfg.d_state},
         {"d_ffn_hidden", cfg.d_ffn_hidden},
         {"dropout_internal", cfg.dropout_internal},
         {"dropout_attention", cfg.dropout_attention},
         {"n_properties", cfg.n_properties}};
  return j.dump();
}

PluginConfig plugin_config_from_json(const std::string& text) {
  json j = json::parse(text);
  PluginConfig cfg;
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.d_state = j.at("d_state").get<int>();
  cfg.d_ffn_hidden = j.at("d_ffn_hidden").get<int>();
  cfg.dropout_internal = j.at("dropout_internal").get<double>();
  cfg.dropout_attention = j.at("dropout_attention").get<double>();
  cfg.n_properties = j.at("n_properties").get<int>();
  return cfg;
}

void save_train_checkpoint(const std::string& path, const ModelParams& model,
                           const PluginParams* plugin, const TrainerState* state,
                           const std::string& stage, const std::string& mode_label) {
  Checkpoint ckpt;
  json meta;
  meta["format"] = 1;
  meta["stage"] = stage;
  meta["mode"] = mode_label;
  meta["model_config"] = json::parse(model_config_json(model.cfg));
  meta["has_task_embedding"] = model.has_task_embedding();
  if (plugin != nullptr) {
    meta["plugin_config"] = json::parse(plugin_config_json(plugin->cfg));
    meta["plugin_d_model"] = plugin->d_model;
  }
  for (const auto& name : model.set.names()) ckpt.tensors.emplace_back(name, model.set.at(name));
  if (plugin != nullptr)
    for (const auto& name : plugin->set.names())
      ckpt.tensors.emplace_back(name, plugin->set.at(name));
  if (state != nullptr) {
    meta["step"] = state->step;
    meta["adam_step"] = state->adam.step;
    meta["rng_state"] = state->rng.state();
    for (const auto& [name, m] : state->adam.m) {
      ckpt.tensors.emplace_back("adam.m." + name,
                                Tensor::from_values(1, int(m.size()), m));
      const auto& v = state->adam.v.at(name);
      ckpt.tensors.emplace_back("adam.v." + name,
                                Tensor::from_values(1, int(v.size()), v));
    }
  }
  ckpt.metadata_json = meta.dump();
  save_checkpoint(path, ckpt);
}

static void fill_param_set(ParamSet& set, const std::vector<TensorSpec>& manifest,
                           const Checkpoint& ckpt) {
  for (const auto& spec : manifest) {
    const Tensor* t = ckpt.find(spec.name);
    if (t == nullptr) fail("checkpoint: missing tensor " + spec.name);
    if (t->rows() != spec.rows || t->cols() != spec.cols)
      fail("checkpoint: tensor " + spec.name + " has shape " + std::to_string(t->rows()) + "x" +
           std::to_string(t->cols()) + ", config expects " + std::to_string(spec.rows) + "x" +
           std::to_string(spec.cols));
    Tensor copy = Tensor::from_values(t->rows(), t->cols(), t->values(), /*requires_grad=*/true);
    set.add(spec.name, copy);
  }
}

LoadedTrainCheckpoint load_train_checkpoint(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  json meta = json::parse(ckpt.metadata_json);
  LoadedTrainCheckpoint out;
  out.stage = meta.value("stage", "");
  out.mode_label = meta.value("mode", "");
  out.model.cfg = model_config_from_json(meta.at("model_config").dump());
  bool task_emb = meta.value("has_task_embedding", false);
  fill_param_set(out.model.set, model_manifest(out.model.cfg, task_emb), ckpt);
  if (meta.contains("plugin_config")) {
    PluginParams plugin;
    plugin.cfg = plugin_config_from_json(meta.at("plugin_config").dump());
    plugin.d_model = meta.at("plugin_d_model").get<int>();
    fill_param_set(plugin.set, plugin_manifest(plugin.cfg, plugin.d_model), ckpt);
    out.plugin = std::move(plugin);
  }
  if (meta.contains("step")) {
    out.state.step = meta.at("step").get<int>();
    out.state.adam.step = meta.at("adam_step").get<int64_t>();
    out.state.rng.set_state(meta.at("rng_state").get<std::string>());
    for (const auto& [name, t] : ckpt.tensors) {
      if (name.rfind("adam.m.", 0) == 0)
        out.state.adam.m[name.substr(7)] = t.values();
      else if (name.rfind("adam.v.", 0) == 0)
        out.state.adam.v[name.substr(7)] = t.values();
    }
  }
  return out;
}

}  // namespace fewsum
