#pragma once

#include <map>
#include <string>
#include <vector>

#include "fewsum/corpus.hpp"
#include "fewsum/metrics.hpp"

namespace fewsum {

struct EvalReport {
  double r1 = 0.0, r2 = 0.0, rl = 0.0;  // mean F1 over references, then entries
  int entry_count = 0;
  std::map<std::string, double> per_domain_rl;
  std::map<std::string, int> per_domain_count;
};

enum class MultiRefAggregation { kMean, kMax };

// Scores each summary against its entry's 3 references (aggregated per the
// chosen rule, mean by default), then averages over entries.
EvalReport evaluate_rouge(const std::map<std::string, std::string>& summaries,
                          const AnnotatedSet& annotated, Split split,
                          MultiRefAggregation agg = MultiRefAggregation::kMean);

struct TextCharacteristics {
  double pov_pct[4] = {0, 0, 0, 0};  // {1st, 2nd, 3rd, NoPr}, percentages
  double len_diff = 0.0;             // mean system words minus mean gold words
  int summary_count = 0;
};

TextCharacteristics text_characteristics(const std::map<std::string, std::string>& summaries,
                                         const AnnotatedSet& gold, Split split);

struct CrossDomainReport {
  std::map<std::string, double> per_domain_mean_rl;
  double overall_mean = 0.0;
  double overall_sigma = 0.0;  // sample stddev over all scores
  bool sigma_defined = false;
};

CrossDomainReport cross_domain_report(const std::map<std::string, std::vector<double>>& scores);

std::string eval_report_csv(const EvalReport& report);
std::string eval_report_table(const std::string& system_name, const EvalReport& report);

}  // namespace fewsum
