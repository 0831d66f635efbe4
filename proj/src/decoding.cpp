#include "fewsum/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace fewsum {

void DecodeConfig::validate() const {
  if (beam_size < 1) fail("decode config: beam_size must be >= 1");
  if (block_n < 2) fail("decode config: block_n must be >= 2");
  if (max_tokens < 1) fail("decode config: max_tokens must be >= 1");
  if (length_norm_alpha < 0.0) fail("decode config: length_norm_alpha must be >= 0");
}

bool ngram_block_allows(const std::vector<int>& hypothesis, int next_token, int n) {
  if (n < 2) fail("ngram_block_allows: n must be >= 2");
  if (int(hypothesis.size()) < n - 1) return true;
  // The n-gram that appending would create.
  std::vector<int> gram(hypothesis.end() - (n - 1), hypothesis.end());
  gram.push_back(next_token);
  for (size_t i = 0; i + size_t(n) <= hypothesis.size(); ++i) {
    bool same = true;
    for (int j = 0; j < n && same; ++j) same = hypothesis[i + size_t(j)] == gram[size_t(j)];
    if (same) return false;
  }
  return true;
}

static double normalized_score(double log_prob, size_t len, double alpha) {
  return log_prob / std::pow(double(std::max<size_t>(len, 1)), alpha);
}

DecodeResult beam_search(const StepScorer& scorer, const DecodeConfig& cfg, int eos_id) {
  cfg.validate();
  const int vocab = scorer.vocab_size();
  if (eos_id < 0 || eos_id >= vocab) fail("beam_search: eos id out of range");

  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> finished;
  for (int step = 0; step < cfg.max_tokens && !live.empty(); ++step) {
    struct Candidate {
      double log_prob;
      int hyp;
      int token;
    };
    std::vector<Candidate> candidates;
    for (int h = 0; h < int(live.size()); ++h) {
      std::vector<double> lp = scorer.log_probs(live[size_t(h)].tokens);
      if (int(lp.size()) != vocab) fail("beam_search: scorer returned wrong vocab size");
      for (int v = 0; v < vocab; ++v) {
        if (v == PAD || v == BOS) continue;
        if (!ngram_block_allows(live[size_t(h)].tokens, v, cfg.block_n)) continue;
        candidates.push_back({live[size_t(h)].log_prob + lp[size_t(v)], h, v});
      }
    }
    if (candidates.empty()) break;
    // Deterministic order: score, then hypothesis index, then token id.
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.token < b.token;
    });
    // Keep the top beam_size expansions; ones ending in EOS retire to the
    // finished pool, the rest stay live.
    std::vector<Hypothesis> next;
    int taken = 0;
    for (const auto& c : candidates) {
      if (taken >= cfg.beam_size) break;
      ++taken;
      Hypothesis h = live[size_t(c.hyp)];
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      h.finished = c.token == eos_id;
      if (h.finished)
        finished.push_back(std::move(h));
      else
        next.push_back(std::move(h));
    }
    live = std::move(next);
  }

  auto best_of = [&](const std::vector<Hypothesis>& pool, bool finished_flag) {
    DecodeResult best;
    bool any = false;
    for (const auto& h : pool) {
      double s = normalized_score(h.log_prob, h.tokens.size(), cfg.length_norm_alpha);
      if (!any || s > best.score) {
        any = true;
        best.tokens = h.tokens;
        best.log_prob = h.log_prob;
        best.score = s;
        best.finished = finished_flag;
      }
    }
    return any ? std::optional<DecodeResult>(best) : std::nullopt;
  };
  if (auto r = best_of(finished, true)) return *r;
  if (auto r = best_of(live, false)) return *r;
  DecodeResult empty;
  empty.finished = false;
  return empty;
}

GeneratorScorer::GeneratorScorer(const ModelParams& model, const Memory& memory,
                                 const Tensor& props)
    : model_(model), memory_(memory), props_(props) {}

std::vector<double> GeneratorScorer::log_probs(const std::vector<int>& prefix) const {
  NoGradGuard ng;
  FwdCtx ctx;  // eval mode
  std::vector<int> inputs;
  inputs.reserve(prefix.size() + 1);
  inputs.push_back(BOS);
  inputs.insert(inputs.end(), prefix.begin(), prefix.end());
  if (int(inputs.size()) > model_.cfg.max_len)
    inputs.erase(inputs.begin() + 1,
                 inputs.begin() + 1 + (int(inputs.size()) - model_.cfg.max_len));
  Tensor logits = generator_forward(model_, inputs, &memory_, props_, ctx);
  const int v = logits.cols();
  const int last = logits.rows() - 1;
  std::vector<double> lp(size_t(v));
  double mx = logits.at(last, 0);
  for (int j = 1; j < v; ++j) mx = std::max(mx, logits.at(last, j));
  double denom = 0.0;
  for (int j = 0; j < v; ++j) denom += std::exp(logits.at(last, j) - mx);
  double log_denom = std::log(denom);
  for (int j = 0; j < v; ++j) lp[size_t(j)] = logits.at(last, j) - mx - log_denom;
  return lp;
}

static SummaryOutput decode_with_props(const ModelParams& model, const BpeModel& bpe,
                                       const DecodeConfig& cfg, const Memory& memory,
                                       const Tensor& props) {
  GeneratorScorer scorer(model, memory, props);
  DecodeResult result = beam_search(scorer, cfg, EOS);
  SummaryOutput out;
  out.text = bpe.decode(TokenSeq::from_ids(result.tokens));
  for (int i = 0; i < kNumProperties; ++i) out.properties_used.v[size_t(i)] = props.at(0, i);
  out.score = result.score;
  out.finished = result.finished;
  return out;
}

static Memory encode_review_texts(const ModelParams& model, const BpeModel& bpe,
                                  const std::vector<Review>& sources) {
  if (sources.empty()) fail("summarize: at least one source review required");
  std::vector<TokenSeq> seqs;
  for (const auto& r : sources) {
    TokenSeq s = bpe.encode(r.text, false);
    if (int(s.ids.size()) > model.cfg.max_len) {
      s.ids.resize(size_t(model.cfg.max_len));
      s = TokenSeq::from_ids(std::move(s.ids));
    }
    seqs.push_back(std::move(s));
  }
  NoGradGuard ng;
  FwdCtx ctx;
  return encode_sources(model, seqs, ctx);
}

SummaryOutput summarize(const ModelParams& model, const PluginParams& plugin, const BpeModel& bpe,
                        const DecodeConfig& cfg, const std::vector<Review>& sources) {
  Memory memory = encode_review_texts(model, bpe, sources);
  NoGradGuard ng;
  FwdCtx ctx;
  Tensor props = plugin_forward(plugin, memory, ctx);
  return decode_with_props(model, bpe, cfg, memory, props);
}

SummaryOutput summarize_oracle(const ModelParams& model, const BpeModel& bpe,
                               const DecodeConfig& cfg, const std::vector<Review>& sources,
                               const PropertyVector& props) {
  double pov_sum = 0.0;
  for (int i = 0; i < kNumProperties; ++i) {
    if (!std::isfinite(props.v[size_t(i)])) fail("summarize_oracle: non-finite property value");
  }
  for (int i = 3; i <= 6; ++i) {
    if (props.v[size_t(i)] < -1e-9) fail("summarize_oracle: negative POV coordinate");
    pov_sum += props.v[size_t(i)];
  }
  if (std::fabs(pov_sum - 1.0) > 1e-6)
    fail("summarize_oracle: POV block must sum to 1 (got " + std::to_string(pov_sum) + ")");
  Memory memory = encode_review_texts(model, bpe, sources);
  return decode_with_props(model, bpe, cfg, memory, props_tensor(props.v));
}

}  // namespace fewsum
