#pragma once

#include <string>
#include <vector>

#include "fewsum/common.hpp"

namespace fewsum {

struct Review {
  std::string id;
  std::string product_id;
  int rating = 0;  // 1..5
  std::string text;
  std::string category;
};

struct ReviewGroup {
  std::string group_id;
  std::string product_id;
  std::vector<Review> reviews;
};

struct LooInstance {
  Review target;
  std::vector<Review> sources;
  std::string group_id;
};

enum class Split { kTrain, kValid, kTest };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct AnnotatedEntry {
  std::string group_id;
  std::string category;
  std::vector<Review> sources;       // exactly 8
  std::vector<std::string> references;  // exactly 3
  Split split = Split::kTrain;
};

struct AnnotatedSet {
  std::vector<AnnotatedEntry> entries;

  std::vector<const AnnotatedEntry*> in_split(Split s) const;
  std::vector<std::string> categories() const;  // distinct, sorted
};

struct FilterConfig {
  int min_reviews_per_product = 10;
  int min_words = 20;
  int max_words = 70;
  int popularity_percentile = 90;
};

// Either explicit per-split counts applied in file order, or "use the split
// labels already present in the file".
struct SplitSpec {
  bool from_labels = false;
  int n_train = 28;
  int n_valid = 12;
  int n_test = 20;

  static SplitSpec amazon_default() { return SplitSpec{false, 28, 12, 20}; }
  static SplitSpec yelp_default() { return SplitSpec{false, 30, 30, 40}; }
  static SplitSpec labels() { return SplitSpec{true, 0, 0, 0}; }
};

std::vector<Review> load_reviews(const std::string& path);
void save_reviews(const std::vector<Review>& reviews, const std::string& path);

std::vector<Review> filter_reviews(const std::vector<Review>& reviews, const FilterConfig& cfg);

// Per product, repeatedly samples group_size reviews without replacement until
// fewer than group_size remain. Deterministic for a fixed seed.
std::vector<ReviewGroup> make_groups(const std::vector<Review>& reviews, int group_size,
                                     uint64_t seed);

std::vector<LooInstance> leave_one_out(const ReviewGroup& group);

AnnotatedSet load_annotated(const std::string& path, const SplitSpec& spec);
void save_annotated(const AnnotatedSet& set, const std::string& path);

// Training/validation entries drawn from categories other than target_domain
// (counts matched to the in-domain spec); test entries of the target domain
// are left unchanged.
AnnotatedSet make_cross_domain_split(const AnnotatedSet& base, const std::string& target_domain,
                                     int n_train, int n_valid, uint64_t seed);

}  // namespace fewsum
