#pragma once

#include "fewsum/corpus.hpp"

namespace fewsum {

struct LexRankConfig {
  double similarity_threshold = 0.1;
  double damping = 0.15;
  double tolerance = 1e-6;
  int max_iterations = 1000;
};

struct SimilarityGraph {
  std::vector<std::string> sentences;
  std::vector<std::vector<double>> weights;  // symmetric tf-idf cosines, zero diagonal
};

SimilarityGraph build_similarity_graph(const std::vector<std::string>& sentences,
                                       double threshold);

// Damped power iteration to the stationary centrality distribution.
std::vector<double> lexrank_centrality(const SimilarityGraph& graph, const LexRankConfig& cfg);

// Sentences admitted by descending centrality until the token budget would be
// exceeded; emitted in source order. budget_tokens <= 0 uses the mean review
// word count of the group.
std::string lexrank(const ReviewGroup& group, int budget_tokens = 0,
                    const LexRankConfig& cfg = {});

// Review with the highest mean ROUGE-L F1 against the other group members;
// ties break toward the lowest index.
const Review& clustroid(const ReviewGroup& group);

const Review& random_review(const ReviewGroup& group, uint64_t seed);

// First sentence of each review, concatenated in group order.
std::string lead(const ReviewGroup& group);

}  // namespace fewsum
