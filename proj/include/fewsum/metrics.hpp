#pragma once

#include <map>
#include <string>
#include <vector>

#include "fewsum/common.hpp"

namespace fewsum {

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PrfScore make_prf(double precision, double recall);

using WordList = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, long long>;

// N-gram bags never cross segment boundaries; callers that score against a
// multi-document reference accumulate one count map over all segments.
NgramCounts ngram_counts(const WordList& words, int n);
long long total_ngrams(const NgramCounts& counts);

// Clipped-count n-gram overlap F1.
PrfScore rouge_n(const WordList& candidate, const WordList& reference, int n);
PrfScore rouge_n_from_counts(const NgramCounts& cand, const NgramCounts& ref);

// Longest-common-subsequence F1 over whole word lists.
PrfScore rouge_l(const WordList& candidate, const WordList& reference);
int lcs_length(const WordList& a, const WordList& b);

struct BwsJudgments {
  long long n_best = 0;
  long long n_worst = 0;
  long long n_total = 0;
};

// (best - worst) / total, in [-1, 1].
double bws_score(const BwsJudgments& j);

}  // namespace fewsum
