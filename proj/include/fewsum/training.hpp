#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fewsum/corpus.hpp"
#include "fewsum/model.hpp"
#include "fewsum/oracle.hpp"
#include "fewsum/plugin.hpp"

namespace fewsum {

enum class StageKind {
  kPretrainLm,
  kTrainLoo,
  kNoveltyPhase,
  kPluginInit,
  kPluginFinetune,
  kJointFinetune,
  kUslFinetune,
  kMtl,
};

std::string stage_name(StageKind kind);
StageKind stage_from_name(const std::string& name);

struct StageConfig {
  StageKind kind = StageKind::kPretrainLm;
  double lr = 1e-3;
  int steps = 100;
  int batch_size = 8;
  double lambda = 0.0;  // novelty coefficient
  uint64_t seed = 1;
  int mix_reviews = 1;  // MTL batch cycle
  int mix_summaries = 1;
  int log_every = 20;
  double clip_norm = 1.0;
  std::vector<std::string> frozen_patterns;  // extra freezes on top of stage defaults
  DistanceWeights distance_weights;

  void validate() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  int64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Bias-corrected Adam over the given tensors, reading their accumulated
// gradients. Throws on non-finite gradients.
void adam_step(const NamedTensors& trainables, AdamState& state, double lr,
               const AdamConfig& cfg = {});

// Scales gradients so their global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(const NamedTensors& trainables, double max_norm);

bool name_matches(const std::string& name, const std::string& pattern);

// ---------------------------------------------------------------------------
// Tokenized training data
// ---------------------------------------------------------------------------

struct TokenizedInstance {
  TokenSeq target;  // BOS ... EOS
  std::vector<TokenSeq> sources;
  PropertyVector props;  // zeros when the oracle is unused
  SourceVocabMask mask;
  std::string group_id;
};

class BpeModel;

TokenSeq truncate_target(TokenSeq seq, int max_len);

std::vector<TokenizedInstance> tokenize_groups(const std::vector<ReviewGroup>& groups,
                                               const BpeModel& bpe, const ModelConfig& cfg,
                                               const OracleConfig& oracle_cfg, bool use_oracle);

// One pair per (entry, reference); oracle targets use the summary as target
// with rating deviation forced to zero.
std::vector<TokenizedInstance> tokenize_summary_pairs(const AnnotatedSet& annotated, Split split,
                                                      const BpeModel& bpe, const ModelConfig& cfg,
                                                      const OracleConfig& oracle_cfg,
                                                      bool use_oracle);

std::vector<TokenSeq> tokenize_lm_corpus(const std::vector<Review>& reviews, const BpeModel& bpe,
                                         const ModelConfig& cfg);

struct StageData {
  std::vector<TokenSeq> lm_targets;
  std::vector<TokenizedInstance> loo;
  std::vector<TokenizedInstance> summaries;
};

// ---------------------------------------------------------------------------
// Stage runner
// ---------------------------------------------------------------------------

struct TrainerState {
  int step = 0;
  AdamState adam;
  Rng rng{1};
};

struct TrainLog {
  double initial_eval_loss = 0.0;
  double final_eval_loss = 0.0;
  std::vector<std::pair<int, double>> step_losses;
};

// Runs cfg.steps - state.step optimization steps (so a freshly loaded state
// resumes mid-stage). plugin may be null for model-only stages.
TrainLog run_stage(const StageConfig& cfg, const StageData& data, ModelParams& model,
                   PluginParams* plugin, TrainerState& state, std::ostream* log_stream);

// Mean eval-mode stage loss over (at most max_n of) the stage's dataset.
double stage_eval_loss(const StageConfig& cfg, const StageData& data, const ModelParams& model,
                       const PluginParams* plugin, int max_n);

// Mean per-token probability mass on out-of-source subwords, eval mode.
double mean_out_of_source_mass(const ModelParams& model,
                               const std::vector<TokenizedInstance>& instances, int max_n);

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

std::string model_config_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);
std::string plugin_config_json(const PluginConfig& cfg);
PluginConfig plugin_config_from_json(const std::string& text);

void save_train_checkpoint(const std::string& path, const ModelParams& model,
                           const PluginParams* plugin, const TrainerState* state,
                           const std::string& stage, const std::string& mode_label);

struct LoadedTrainCheckpoint {
  ModelParams model;
  std::optional<PluginParams> plugin;
  TrainerState state;
  std::string stage;
  std::string mode_label;
};

LoadedTrainCheckpoint load_train_checkpoint(const std::string& path);

}  // namespace fewsum
