#include "fewsum/metrics.hpp"

#include <algorithm>

namespace fewsum {

PrfScore make_prf(double precision, double recall) {
  PrfScore s;
  s.precision = precision;
  s.recall = recall;
  s.f1 = (precision + recall > 0.0) ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return s;
}

NgramCounts ngram_counts(const WordList& words, int n) {
  NgramCounts counts;
  if (n < 1) fail("ngram_counts: n must be >= 1");
  if (int(words.size()) < n) return counts;
  for (size_t i = 0; i + size_t(n) <= words.size(); ++i)
    ++counts[std::vector<std::string>(words.begin() + long(i), words.begin() + long(i) + n)];
  return counts;
}

long long total_ngrams(const NgramCounts& counts) {
  long long total = 0;
  for (const auto& [g, c] : counts) total += c;
  return total;
}

PrfScore rouge_n_from_counts(const NgramCounts& cand, const NgramCounts& ref) {
  long long overlap = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  long long n_cand = total_ngrams(cand);
  long long n_ref = total_ngrams(ref);
  double p = n_cand > 0 ? double(overlap) / double(n_cand) : 0.0;
  double r = n_ref > 0 ? double(overlap) / double(n_ref) : 0.0;
  return make_prf(p, r);
}

PrfScore rouge_n(const WordList& candidate, const WordList& reference, int n) {
  return rouge_n_from_counts(ngram_counts(candidate, n), ngram_counts(reference, n));
}

int lcs_length(const WordList& a, const WordList& b) {
  const size_t m = a.size(), n = b.size();
  if (m == 0 || n == 0) return 0;
  std::vector<int> prev(n + 1, 0), cur(n + 1, 0);
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

PrfScore rouge_l(const WordList& candidate, const WordList& reference) {
  int l = lcs_length(candidate, reference);
  double p = candidate.empty() ? 0.0 : double(l) / double(candidate.size());
  double r = reference.empty() ? 0.0 : double(l) / double(reference.size());
  return make_prf(p, r);
}

double bws_score(const BwsJudgments& j) {
  if (j.n_total <= 0) fail("bws_score: n_total must be positive");
  if (j.n_best + j.n_worst > j.n_total) fail("bws_score: best + worst exceeds total");
  return double(j.n_best - j.n_worst) / double(j.n_total);
}

}  // namespace fewsum
