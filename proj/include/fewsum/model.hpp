#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "fewsum/tensor.hpp"
#include "fewsum/textproc.hpp"

namespace fewsum {

struct ModelConfig {
  int n_layers = 2;
  int n_heads = 2;
  int d_subword = 60;
  int d_len = 4;
  int d_ffn = 128;
  int vocab_size = 600;
  double dropout_sublayer = 0.1;
  double dropout_emb = 0.1;
  int n_properties = 9;
  int max_len = 128;

  int d_model() const { return d_subword + d_len; }
  void validate() const;

  static ModelConfig paper_preset();
  static ModelConfig desk_preset();
};

struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
};

int64_t manifest_param_count(const std::vector<TensorSpec>& manifest);

// Named parameter tensors in fixed manifest order.
class ParamSet {
 public:
  void add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  const std::vector<std::string>& names() const { return order_; }
  int64_t param_count() const;
  void zero_grad();

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> index_;
};

// Manifest of the shared encoder-generator stack. Includes the output head
// that maps d_model back to the subword embedding width so logits can reuse
// the embedding table as the output projection.
std::vector<TensorSpec> model_manifest(const ModelConfig& cfg, bool with_task_embedding = false);

struct ModelParams {
  ModelConfig cfg;
  ParamSet set;

  static ModelParams init(const ModelConfig& cfg, Rng& rng, bool with_task_embedding = false);
  int64_t param_count() const { return set.param_count(); }
  bool has_task_embedding() const { return set.has("model.task_emb"); }
};

// Contextual states of the encoded sources, one block per source review, with
// per-position attendability (PAD positions are never attended).
struct Memory {
  Tensor states;  // [total positions, d_model]
  std::vector<int> block_offset;
  std::vector<int> block_len;
  std::vector<uint8_t> attendable;

  int total() const { return states.defined() ? states.rows() : 0; }
  int n_blocks() const { return int(block_len.size()); }
};

struct FwdCtx {
  bool train = false;
  Rng* rng = nullptr;  // required when train is true
};

Memory encode_sources(const ModelParams& params, const std::vector<TokenSeq>& sources,
                      const FwdCtx& ctx);

// Teacher-forcing forward over input token rows. memory may be null (plain LM
// mode, cross-attention skipped). props is a [1, n_properties] tensor; pass
// zeros when training without the oracle. task_row, when defined, is added to
// every projected input position.
Tensor generator_forward(const ModelParams& params, const std::vector<int>& input_ids,
                         const Memory* memory, const Tensor& props, const FwdCtx& ctx,
                         const Tensor& task_row = Tensor());

struct SourceVocabMask {
  std::vector<uint8_t> in_source;  // size vocab_size; specials always false

  static SourceVocabMask from_sources(const std::vector<TokenSeq>& sources, int vocab_size);
};

// Teacher-forced mean NLL of the target given memory and properties.
// target must carry BOS ... EOS; PAD labels are ignored.
Tensor loo_loss(const ModelParams& params, const TokenSeq& target, const Memory* memory,
                const Tensor& props, const FwdCtx& ctx, const Tensor& task_row = Tensor());

// Total probability mass assigned to out-of-source subwords, summed over all
// logit rows. In [0, T].
Tensor novelty_penalty(const Tensor& logits, const SourceVocabMask& mask);

Tensor props_tensor(const std::array<double, 9>& v);
Tensor zero_props();

}  // namespace fewsum
