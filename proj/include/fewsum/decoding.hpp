#pragma once

#include "fewsum/model.hpp"
#include "fewsum/oracle.hpp"
#include "fewsum/plugin.hpp"

namespace fewsum {

struct DecodeConfig {
  int beam_size = 5;
  int block_n = 3;
  int max_tokens = 80;
  double length_norm_alpha = 0.8;

  void validate() const;
};

// Next-token log-probability source; lets the beam run against both the
// transformer generator and hand-built tables in tests.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual int vocab_size() const = 0;
  // prefix holds previously generated tokens (BOS excluded).
  virtual std::vector<double> log_probs(const std::vector<int>& prefix) const = 0;
};

// True iff appending next_token does not recreate an n-gram already present
// in the hypothesis.
bool ngram_block_allows(const std::vector<int>& hypothesis, int next_token, int n);

struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  bool finished = false;
};

struct DecodeResult {
  std::vector<int> tokens;  // ends with EOS when finished
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / length^alpha
  bool finished = false;
};

DecodeResult beam_search(const StepScorer& scorer, const DecodeConfig& cfg, int eos_id);

// Beam search against the generator conditioned on memory and props.
class GeneratorScorer : public StepScorer {
 public:
  GeneratorScorer(const ModelParams& model, const Memory& memory, const Tensor& props);
  int vocab_size() const override { return model_.cfg.vocab_size; }
  std::vector<double> log_probs(const std::vector<int>& prefix) const override;

 private:
  const ModelParams& model_;
  const Memory& memory_;
  Tensor props_;
};

struct SummaryOutput {
  std::string text;
  PropertyVector properties_used;
  double score = 0.0;
  bool finished = true;
};

// Property source is the plug-in.
SummaryOutput summarize(const ModelParams& model, const PluginParams& plugin, const BpeModel& bpe,
                        const DecodeConfig& cfg, const std::vector<Review>& sources);

// Bypasses the plug-in with an explicit property vector.
SummaryOutput summarize_oracle(const ModelParams& model, const BpeModel& bpe,
                               const DecodeConfig& cfg, const std::vector<Review>& sources,
                               const PropertyVector& props);

}  // namespace fewsum
