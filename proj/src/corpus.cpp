#include "fewsum/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "fewsum/textproc.hpp"
#include "json.hpp"

namespace fewsum {

using nlohmann::json;

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid" || name == "validation" || name == "dev") return Split::kValid;
  if (name == "test") return Split::kTest;
  fail("unknown split label: " + name);
}

std::vector<const AnnotatedEntry*> AnnotatedSet::in_split(Split s) const {
  std::vector<const AnnotatedEntry*> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(&e);
  return out;
}

std::vector<std::string> AnnotatedSet::categories() const {
  std::set<std::string> cats;
  for (const auto& e : entries) cats.insert(e.category);
  return {cats.begin(), cats.end()};
}

// ---------------------------------------------------------------------------
// JSONL ingestion
// ---------------------------------------------------------------------------

static std::string require_string(const json& j, const char* key, int line_no) {
  if (!j.contains(key))
    fail("line " + std::to_string(line_no) + ": missing field \"" + key + "\"");
  if (!j[key].is_string())
    fail("line " + std::to_string(line_no) + ": field \"" + key + "\" must be a string");
  return j[key].get<std::string>();
}

static int require_int(const json& j, const char* key, int line_no) {
  if (!j.contains(key))
    fail("line " + std::to_string(line_no) + ": missing field \"" + key + "\"");
  if (!j[key].is_number_integer())
    fail("line " + std::to_string(line_no) + ": field \"" + key + "\" must be an integer");
  return j[key].get<int>();
}

static Review review_from_json(const json& j, int line_no) {
  Review r;
  r.id = require_string(j, "id", line_no);
  r.product_id = require_string(j, "product_id", line_no);
  r.rating = require_int(j, "rating", line_no);
  r.text = require_string(j, "text", line_no);
  r.category = j.contains("category") ? j["category"].get<std::string>() : "";
  if (r.rating < 1 || r.rating > 5)
    fail("line " + std::to_string(line_no) + ": rating " + std::to_string(r.rating) +
         " outside [1,5]");
  return r;
}

static json review_to_json(const Review& r) {
  return json{{"id", r.id},
              {"product_id", r.product_id},
              {"rating", r.rating},
              {"text", r.text},
              {"category", r.category}};
}

std::vector<Review> load_reviews(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail("load_reviews: cannot open " + path);
  std::vector<Review> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail("line " + std::to_string(line_no) + ": malformed JSON");
    out.push_back(review_from_json(j, line_no));
  }
  return out;
}

void save_reviews(const std::vector<Review>& reviews, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail("save_reviews: cannot open " + path);
  for (const auto& r : reviews) os << review_to_json(r).dump() << "\n";
}

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

std::vector<Review> filter_reviews(const std::vector<Review>& reviews, const FilterConfig& cfg) {
  // 1. Length window on whitespace word counts.
  std::vector<Review> kept;
  for (const auto& r : reviews) {
    int words = count_words(r.text);
    if (words >= cfg.min_words && words <= cfg.max_words) kept.push_back(r);
  }
  // 2. Drop products with too few surviving reviews.
  std::map<std::string, int> counts;
  for (const auto& r : kept) ++counts[r.product_id];
  std::vector<Review> enough;
  for (const auto& r : kept)
    if (counts[r.product_id] >= cfg.min_reviews_per_product) enough.push_back(r);
  counts.clear();
  for (const auto& r : enough) ++counts[r.product_id];
  if (counts.empty()) return {};
  // 3. Popularity cut: nearest-rank percentile over per-product counts;
  //    products strictly above the percentile value are removed.
  std::vector<int> sorted_counts;
  for (const auto& [p, c] : counts) sorted_counts.push_back(c);
  std::sort(sorted_counts.begin(), sorted_counts.end());
  size_t rank = size_t(std::ceil(double(cfg.popularity_percentile) / 100.0 *
                                 double(sorted_counts.size())));
  rank = std::min(std::max<size_t>(rank, 1), sorted_counts.size());
  int threshold = sorted_counts[rank - 1];
  std::vector<Review> out;
  for (const auto& r : enough)
    if (counts[r.product_id] <= threshold) out.push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// Groups and leave-one-out
// ---------------------------------------------------------------------------

std::vector<ReviewGroup> make_groups(const std::vector<Review>& reviews, int group_size,
                                     uint64_t seed) {
  if (group_size < 2) fail("make_groups: group_size must be >= 2");
  // Products in first-appearance order so the result depends only on input
  // order and seed.
  std::vector<std::string> product_order;
  std::map<std::string, std::vector<Review>> by_product;
  for (const auto& r : reviews) {
    auto [it, inserted] = by_product.try_emplace(r.product_id);
    if (inserted) product_order.push_back(r.product_id);
    it->second.push_back(r);
  }
  std::vector<ReviewGroup> out;
  Rng rng(seed);
  for (const auto& pid : product_order) {
    auto& pool = by_product[pid];
    int next_index = 0;
    while (int(pool.size()) >= group_size) {
      auto picks = rng.sample_without_replacement(int(pool.size()), group_size);
      std::sort(picks.begin(), picks.end());
      ReviewGroup g;
      g.product_id = pid;
      g.group_id = pid + "#" + std::to_string(next_index++);
      for (int idx : picks) g.reviews.push_back(pool[size_t(idx)]);
      // Remove picked reviews; indices are sorted, erase from the back.
      for (auto it = picks.rbegin(); it != picks.rend(); ++it)
        pool.erase(pool.begin() + long(*it));
      out.push_back(std::move(g));
    }
  }
  return out;
}

std::vector<LooInstance> leave_one_out(const ReviewGroup& group) {
  std::vector<LooInstance> out;
  for (size_t i = 0; i < group.reviews.size(); ++i) {
    LooInstance inst;
    inst.target = group.reviews[i];
    inst.group_id = group.group_id;
    for (size_t j = 0; j < group.reviews.size(); ++j)
      if (j != i) inst.sources.push_back(group.reviews[j]);
    out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Annotated summaries
// ---------------------------------------------------------------------------

AnnotatedSet load_annotated(const std::string& path, const SplitSpec& spec) {
  std::ifstream is(path);
  if (!is) fail("load_annotated: cannot open " + path);
  AnnotatedSet set;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail("line " + std::to_string(line_no) + ": malformed JSON");
    AnnotatedEntry e;
    e.group_id = require_string(j, "group_id", line_no);
    e.category = j.contains("category") ? j["category"].get<std::string>() : "";
    if (!j.contains("reviews") || !j["reviews"].is_array())
      fail("line " + std::to_string(line_no) + ": missing reviews array");
    for (const auto& rj : j["reviews"]) e.sources.push_back(review_from_json(rj, line_no));
    if (!j.contains("summaries") || !j["summaries"].is_array())
      fail("line " + std::to_string(line_no) + ": missing summaries array");
    for (const auto& sj : j["summaries"]) e.references.push_back(sj.get<std::string>());
    if (e.sources.size() != 8)
      fail("annotated entry " + e.group_id + ": expected 8 source reviews, got " +
           std::to_string(e.sources.size()));
    if (e.references.size() != 3)
      fail("annotated entry " + e.group_id + ": expected 3 reference summaries, got " +
           std::to_string(e.references.size()));
    if (j.contains("split")) e.split = split_from_name(j["split"].get<std::string>());
    set.entries.push_back(std::move(e));
  }
  if (!spec.from_labels) {
    int total = spec.n_train + spec.n_valid + spec.n_test;
    if (int(set.entries.size()) != total)
      fail("load_annotated: split spec covers " + std::to_string(total) + " entries but file has " +
           std::to_string(set.entries.size()));
    for (int i = 0; i < int(set.entries.size()); ++i) {
      auto& e = set.entries[size_t(i)];
      if (i < spec.n_train)
        e.split = Split::kTrain;
      else if (i < spec.n_train + spec.n_valid)
        e.split = Split::kValid;
      else
        e.split = Split::kTest;
    }
  }
  return set;
}

void save_annotated(const AnnotatedSet& set, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail("save_annotated: cannot open " + path);
  for (const auto& e : set.entries) {
    json j;
    j["group_id"] = e.group_id;
    j["category"] = e.category;
    j["reviews"] = json::array();
    for (const auto& r : e.sources) j["reviews"].push_back(review_to_json(r));
    j["summaries"] = e.references;
    j["split"] = split_name(e.split);
    os << j.dump() << "\n";
  }
}

AnnotatedSet make_cross_domain_split(const AnnotatedSet& base, const std::string& target_domain,
                                     int n_train, int n_valid, uint64_t seed) {
  std::vector<const AnnotatedEntry*> pool;
  for (const auto& e : base.entries)
    if (e.category != target_domain) pool.push_back(&e);
  if (int(pool.size()) < n_train + n_valid)
    fail("make_cross_domain_split: only " + std::to_string(pool.size()) +
         " out-of-domain entries for " + std::to_string(n_train + n_valid) + " requested");
  Rng rng(seed);
  auto picks = rng.sample_without_replacement(int(pool.size()), n_train + n_valid);
  AnnotatedSet out;
  for (int i = 0; i < n_train + n_valid; ++i) {
    AnnotatedEntry e = *pool[size_t(picks[size_t(i)])];
    e.split = i < n_train ? Split::kTrain : Split::kValid;
    out.entries.push_back(std::move(e));
  }
  for (const auto& e : base.entries)
    if (e.category == target_domain && e.split == Split::kTest) out.entries.push_back(e);
  return out;
}

}  // namespace fewsum
