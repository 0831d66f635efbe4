#include "fewsum/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fewsum/oracle.hpp"
#include "fewsum/textproc.hpp"

namespace fewsum {

EvalReport evaluate_rouge(const std::map<std::string, std::string>& summaries,
                          const AnnotatedSet& annotated, Split split, MultiRefAggregation agg) {
  auto entries = annotated.in_split(split);
  std::vector<std::string> missing;
  for (const auto* e : entries)
    if (!summaries.count(e->group_id)) missing.push_back(e->group_id);
  if (!missing.empty()) {
    std::string joined;
    for (const auto& m : missing) joined += (joined.empty() ? "" : ", ") + m;
    fail("evaluate_rouge: missing summaries for groups: " + joined);
  }
  if (entries.empty()) fail("evaluate_rouge: no entries in split " + split_name(split));

  EvalReport report;
  for (const auto* e : entries) {
    WordList cand = word_tokenize(summaries.at(e->group_id));
    double e_r1 = 0, e_r2 = 0, e_rl = 0;
    bool first = true;
    for (const auto& ref_text : e->references) {
      WordList ref = word_tokenize(ref_text);
      double r1 = rouge_n(cand, ref, 1).f1;
      double r2 = rouge_n(cand, ref, 2).f1;
      double rl = rouge_l(cand, ref).f1;
      if (agg == MultiRefAggregation::kMean) {
        e_r1 += r1 / double(e->references.size());
        e_r2 += r2 / double(e->references.size());
        e_rl += rl / double(e->references.size());
      } else {
        if (first || r1 > e_r1) e_r1 = r1;
        if (first || r2 > e_r2) e_r2 = r2;
        if (first || rl > e_rl) e_rl = rl;
        first = false;
      }
    }
    report.r1 += e_r1;
    report.r2 += e_r2;
    report.rl += e_rl;
    report.per_domain_rl[e->category] += e_rl;
    report.per_domain_count[e->category] += 1;
    ++report.entry_count;
  }
  report.r1 /= double(report.entry_count);
  report.r2 /= double(report.entry_count);
  report.rl /= double(report.entry_count);
  for (auto& [domain, total] : report.per_domain_rl)
    total /= double(report.per_domain_count.at(domain));
  return report;
}

TextCharacteristics text_characteristics(const std::map<std::string, std::string>& summaries,
                                         const AnnotatedSet& gold, Split split) {
  if (summaries.empty()) fail("text_characteristics: no summaries");
  TextCharacteristics out;
  // Marginal POV: uniform average of per-summary 4-class distributions.
  for (const auto& [gid, text] : summaries) {
    auto dist = pov_distribution(text, PronounLexicon::standard());
    for (int k = 0; k < 4; ++k) out.pov_pct[k] += dist[size_t(k)];
    ++out.summary_count;
  }
  for (int k = 0; k < 4; ++k) out.pov_pct[k] = out.pov_pct[k] / double(out.summary_count) * 100.0;

  double sys_words = 0.0;
  for (const auto& [gid, text] : summaries) sys_words += double(word_tokenize(text).size());
  sys_words /= double(summaries.size());
  double gold_words = 0.0;
  int gold_count = 0;
  for (const auto* e : gold.in_split(split)) {
    for (const auto& ref : e->references) {
      gold_words += double(word_tokenize(ref).size());
      ++gold_count;
    }
  }
  if (gold_count == 0) fail("text_characteristics: no gold references in split");
  out.len_diff = sys_words - gold_words / double(gold_count);
  return out;
}

CrossDomainReport cross_domain_report(const std::map<std::string, std::vector<double>>& scores) {
  CrossDomainReport report;
  std::vector<double> all;
  for (const auto& [domain, values] : scores) {
    if (values.empty()) fail("cross_domain_report: domain " + domain + " has no scores");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    report.per_domain_mean_rl[domain] = mean;
    all.insert(all.end(), values.begin(), values.end());
  }
  if (all.empty()) fail("cross_domain_report: no scores");
  for (double v : all) report.overall_mean += v;
  report.overall_mean /= double(all.size());
  if (all.size() >= 2) {
    double sq = 0.0;
    for (double v : all) sq += (v - report.overall_mean) * (v - report.overall_mean);
    report.overall_sigma = std::sqrt(sq / double(all.size() - 1));
    report.sigma_defined = true;
  }
  return report;
}

std::string eval_report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "metric,value\n";
  os << "rouge1_f1," << report.r1 << "\n";
  os << "rouge2_f1," << report.r2 << "\n";
  os << "rougel_f1," << report.rl << "\n";
  os << "entries," << report.entry_count << "\n";
  for (const auto& [domain, rl] : report.per_domain_rl)
    os << "rougel_f1[" << domain << "]," << rl << "\n";
  return os.str();
}

std::string eval_report_table(const std::string& system_name, const EvalReport& report) {
  std::ostringstream os;
  char line[128];
  os << "system                R1      R2      RL\n";
  std::snprintf(line, sizeof(line), "%-18s %.4f  %.4f  %.4f\n", system_name.c_str(), report.r1,
                report.r2, report.rl);
  os << line;
  return os.str();
}

}  // namespace fewsum
