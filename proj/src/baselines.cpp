#include "fewsum/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fewsum/metrics.hpp"
#include "fewsum/textproc.hpp"

namespace fewsum {

SimilarityGraph build_similarity_graph(const std::vector<std::string>& sentences,
                                       double threshold) {
  SimilarityGraph g;
  g.sentences = sentences;
  const int n = int(sentences.size());
  g.weights.assign(size_t(n), std::vector<double>(size_t(n), 0.0));
  if (n == 0) return g;

  std::vector<std::map<std::string, double>> tf(size_t(n));
  std::map<std::string, int> df;
  for (int i = 0; i < n; ++i) {
    for (const auto& w : word_tokenize(sentences[size_t(i)])) ++tf[size_t(i)][w];
    for (const auto& [w, c] : tf[size_t(i)]) ++df[w];
  }
  std::vector<std::map<std::string, double>> tfidf(size_t(n));
  std::vector<double> norm(size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (const auto& [w, c] : tf[size_t(i)]) {
      double idf = std::log(double(n) / double(df[w]));
      double v = c * idf;
      tfidf[size_t(i)][w] = v;
      norm[size_t(i)] += v * v;
    }
    norm[size_t(i)] = std::sqrt(norm[size_t(i)]);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (const auto& [w, v] : tfidf[size_t(i)]) {
        auto it = tfidf[size_t(j)].find(w);
        if (it != tfidf[size_t(j)].end()) dot += v * it->second;
      }
      double cos = 0.0;
      if (norm[size_t(i)] > 0.0 && norm[size_t(j)] > 0.0)
        cos = dot / (norm[size_t(i)] * norm[size_t(j)]);
      if (cos >= threshold) {
        g.weights[size_t(i)][size_t(j)] = cos;
        g.weights[size_t(j)][size_t(i)] = cos;
      }
    }
  }
  return g;
}

std::vector<double> lexrank_centrality(const SimilarityGraph& graph, const LexRankConfig& cfg) {
  const int n = int(graph.sentences.size());
  if (n == 0) return {};
  // Row-normalized transition matrix; rows with no surviving edges jump
  // uniformly.
  std::vector<std::vector<double>> p(size_t(n), std::vector<double>(size_t(n), 0.0));
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) row_sum += graph.weights[size_t(i)][size_t(j)];
    for (int j = 0; j < n; ++j)
      p[size_t(i)][size_t(j)] = row_sum > 0.0 ? graph.weights[size_t(i)][size_t(j)] / row_sum
                                              : 1.0 / double(n);
  }
  std::vector<double> c(size_t(n), 1.0 / double(n)), next(size_t(n));
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += c[size_t(i)] * p[size_t(i)][size_t(j)];
      next[size_t(j)] = cfg.damping / double(n) + (1.0 - cfg.damping) * s;
    }
    double diff = 0.0;
    for (int j = 0; j < n; ++j) diff += std::fabs(next[size_t(j)] - c[size_t(j)]);
    c = next;
    if (diff < cfg.tolerance) break;
  }
  return c;
}

std::string lexrank(const ReviewGroup& group, int budget_tokens, const LexRankConfig& cfg) {
  if (group.reviews.empty()) fail("lexrank: empty group");
  std::vector<std::string> sentences;
  for (const auto& r : group.reviews)
    for (auto& s : sentence_split(r.text)) sentences.push_back(s);
  if (sentences.empty()) return "";

  if (budget_tokens <= 0) {
    double total = 0.0;
    for (const auto& r : group.reviews) total += double(word_tokenize(r.text).size());
    budget_tokens = int(total / double(group.reviews.size()));
  }

  SimilarityGraph graph = build_similarity_graph(sentences, cfg.similarity_threshold);
  std::vector<double> centrality = lexrank_centrality(graph, cfg);
  std::vector<int> order(sentences.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return centrality[size_t(a)] > centrality[size_t(b)];
  });

  std::vector<bool> selected(sentences.size(), false);
  int used = 0;
  bool any = false;
  for (int idx : order) {
    int len = int(word_tokenize(sentences[size_t(idx)]).size());
    if (any && used + len > budget_tokens) break;
    selected[size_t(idx)] = true;
    used += len;
    any = true;
    if (used >= budget_tokens) break;
  }
  std::string out;
  for (size_t i = 0; i < sentences.size(); ++i) {
    if (!selected[i]) continue;
    if (!out.empty()) out += ' ';
    out += sentences[i];
  }
  return out;
}

const Review& clustroid(const ReviewGroup& group) {
  if (group.reviews.size() < 2) fail("clustroid: group must have at least 2 reviews");
  std::vector<WordList> words;
  for (const auto& r : group.reviews) words.push_back(word_tokenize(r.text));
  int best = 0;
  double best_score = -1.0;
  for (int i = 0; i < int(group.reviews.size()); ++i) {
    double total = 0.0;
    for (int j = 0; j < int(group.reviews.size()); ++j) {
      if (i == j) continue;
      total += rouge_l(words[size_t(i)], words[size_t(j)]).f1;
    }
    double mean = total / double(group.reviews.size() - 1);
    if (mean > best_score) {
      best_score = mean;
      best = i;
    }
  }
  return group.reviews[size_t(best)];
}

const Review& random_review(const ReviewGroup& group, uint64_t seed) {
  if (group.reviews.empty()) fail("random_review: empty group");
  Rng rng(seed);
  return group.reviews[size_t(rng.next_int(int(group.reviews.size())))];
}

std::string lead(const ReviewGroup& group) {
  if (group.reviews.empty()) fail("lead: empty group");
  std::string out;
  for (const auto& r : group.reviews) {
    auto sentences = sentence_split(r.text);
    if (sentences.empty()) continue;
    if (!out.empty()) out += ' ';
    out += sentences.front();
  }
  return out;
}

}  // namespace fewsum
