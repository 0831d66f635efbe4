#pragma once

#include <array>

#include "fewsum/model.hpp"
#include "fewsum/oracle.hpp"

namespace fewsum {

struct PluginConfig {
  int n_layers = 3;
  int n_heads = 3;
  int d_state = 30;
  int d_ffn_hidden = 20;
  double dropout_internal = 0.4;
  double dropout_attention = 0.15;
  int n_properties = 9;

  void validate() const;
  static PluginConfig paper_preset() { return PluginConfig{}; }
  static PluginConfig desk_preset() { return PluginConfig{}; }
};

std::vector<TensorSpec> plugin_manifest(const PluginConfig& cfg, int d_model);

struct PluginParams {
  PluginConfig cfg;
  int d_model = 0;  // width of the encoder memory it reads
  ParamSet set;

  static PluginParams init(const PluginConfig& cfg, int d_model, Rng& rng);
  int64_t param_count() const { return set.param_count(); }
};

// Pooled-query attention over the encoder memory; exactly permutation
// invariant over whole-source blocks (blocks are re-ordered canonically
// before any arithmetic). Coverage outputs pass through a logistic map, the
// POV block through softmax; deviations stay unbounded.
Tensor plugin_forward(const PluginParams& plugin, const Memory& memory, const FwdCtx& ctx);

struct DistanceWeights {
  double w_len_dev = 0.1;
  double w_rating_dev = 1.0;
  double w_pov = 0.08;
  double w_coverage = 0.5;
};

// Weighted L1 on coverage and deviations plus KL(target_pov || pred_pov) with
// 1e-8 smoothing inside the logs.
Tensor plugin_distance(const Tensor& pred, const PropertyVector& target,
                       const DistanceWeights& w);

double plugin_model_ratio(const PluginParams& plugin, const ModelParams& model);

}  // namespace fewsum
