#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "fewsum/corpus.hpp"

namespace fewsum {

constexpr int kNumProperties = 9;

// Fixed layout: [rouge1_f1, rouge2_f1, rougel_f1,
//                pov_1st, pov_2nd, pov_3rd, pov_none,
//                rating_dev, length_dev].
struct PropertyVector {
  std::array<double, kNumProperties> v{};

  double rouge1() const { return v[0]; }
  double rouge2() const { return v[1]; }
  double rougel() const { return v[2]; }
  std::array<double, 4> pov() const { return {v[3], v[4], v[5], v[6]}; }
  double rating_dev() const { return v[7]; }
  double length_dev() const { return v[8]; }
};

struct PronounLexicon {
  std::set<std::string> first, second, third;

  static const PronounLexicon& standard();
};

struct CoverageScores {
  double r1 = 0.0, r2 = 0.0, rl = 0.0;
};

// ROUGE F1s of the target against the source reviews. N-gram counts are
// accumulated per source (never across source boundaries); the LCS score uses
// the sources concatenated in group order.
CoverageScores content_coverage(const Review& target, const std::vector<Review>& sources);

// Distribution over {1st, 2nd, 3rd, no-pronoun}. Texts with no pronoun hits
// map to (0,0,0,1).
std::array<double, 4> pov_distribution(const std::string& text, const PronounLexicon& lexicon);

double rating_deviation(int target_rating, const std::vector<int>& source_ratings);

// Word-token count difference, target minus mean of sources.
double length_deviation(const Review& target, const std::vector<Review>& sources);

struct OracleConfig {
  int length_norm = 70;          // divisor applied to length_dev (FilterConfig.max_words)
  bool zero_rating_dev = false;  // summary-mode targets carry no rating
};

PropertyVector compute_properties(const LooInstance& instance, const OracleConfig& cfg = {});

void dump_properties_csv(const std::vector<LooInstance>& instances, const OracleConfig& cfg,
                         const std::string& path);

}  // namespace fewsum
