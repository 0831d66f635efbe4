#include "fewsum/oracle.hpp"

#include <fstream>

#include "fewsum/metrics.hpp"
#include "fewsum/textproc.hpp"

namespace fewsum {

const PronounLexicon& PronounLexicon::standard() {
  static const PronounLexicon lex{
      {"i", "me", "my", "mine", "myself", "we", "us", "our", "ours", "ourselves"},
      {"you", "your", "yours", "yourself", "yourselves"},
      {"he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself",
       "they", "them", "their", "theirs", "themselves"}};
  return lex;
}

CoverageScores content_coverage(const Review& target, const std::vector<Review>& sources) {
  if (sources.empty()) fail("content_coverage: sources must be non-empty");
  WordList cand = word_tokenize(target.text);
  CoverageScores out;
  if (cand.empty()) return out;

  NgramCounts ref1, ref2;
  WordList ref_concat;
  for (const auto& s : sources) {
    WordList words = word_tokenize(s.text);
    for (const auto& [g, c] : ngram_counts(words, 1)) ref1[g] += c;
    for (const auto& [g, c] : ngram_counts(words, 2)) ref2[g] += c;
    ref_concat.insert(ref_concat.end(), words.begin(), words.end());
  }
  out.r1 = rouge_n_from_counts(ngram_counts(cand, 1), ref1).f1;
  out.r2 = rouge_n_from_counts(ngram_counts(cand, 2), ref2).f1;
  out.rl = rouge_l(cand, ref_concat).f1;
  return out;
}

std::array<double, 4> pov_distribution(const std::string& text, const PronounLexicon& lexicon) {
  double c1 = 0, c2 = 0, c3 = 0;
  for (const auto& w : word_tokenize(text)) {
    if (lexicon.first.count(w)) ++c1;
    else if (lexicon.second.count(w)) ++c2;
    else if (lexicon.third.count(w)) ++c3;
  }
  double total = c1 + c2 + c3;
  if (total == 0.0) return {0.0, 0.0, 0.0, 1.0};
  return {c1 / total, c2 / total, c3 / total, 0.0};
}

double rating_deviation(int target_rating, const std::vector<int>& source_ratings) {
  if (source_ratings.empty()) fail("rating_deviation: sources must be non-empty");
  double sum = 0.0;
  for (int r : source_ratings) sum += double(r);
  return double(target_rating) - sum / double(source_ratings.size());
}

double length_deviation(const Review& target, const std::vector<Review>& sources) {
  if (sources.empty()) fail("length_deviation: sources must be non-empty");
  double sum = 0.0;
  for (const auto& s : sources) sum += double(word_tokenize(s.text).size());
  return double(word_tokenize(target.text).size()) - sum / double(sources.size());
}

PropertyVector compute_properties(const LooInstance& instance, const OracleConfig& cfg) {
  if (instance.sources.empty()) fail("compute_properties: instance has no sources");
  PropertyVector out;
  CoverageScores cov = content_coverage(instance.target, instance.sources);
  out.v[0] = cov.r1;
  out.v[1] = cov.r2;
  out.v[2] = cov.rl;
  auto pov = pov_distribution(instance.target.text, PronounLexicon::standard());
  out.v[3] = pov[0];
  out.v[4] = pov[1];
  out.v[5] = pov[2];
  out.v[6] = pov[3];
  if (cfg.zero_rating_dev) {
    out.v[7] = 0.0;
  } else {
    std::vector<int> ratings;
    for (const auto& s : instance.sources) ratings.push_back(s.rating);
    out.v[7] = rating_deviation(instance.target.rating, ratings);
  }
  double norm = cfg.length_norm > 0 ? double(cfg.length_norm) : 1.0;
  out.v[8] = length_deviation(instance.target, instance.sources) / norm;
  return out;
}

void dump_properties_csv(const std::vector<LooInstance>& instances, const OracleConfig& cfg,
                         const std::string& path) {
  std::ofstream os(path);
  if (!os) fail("dump_properties_csv: cannot open " + path);
  os << "rouge1_f1,rouge2_f1,rougel_f1,pov_1st,pov_2nd,pov_3rd,pov_none,rating_dev,length_dev\n";
  for (const auto& inst : instances) {
    PropertyVector p = compute_properties(inst, cfg);
    for (int i = 0; i < kNumProperties; ++i) os << (i ? "," : "") << p.v[size_t(i)];
    os << "\n";
  }
}

}  // namespace fewsum
