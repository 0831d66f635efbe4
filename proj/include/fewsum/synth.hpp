#pragma once

#include "fewsum/corpus.hpp"

namespace fewsum {

// Templated product-review generator with controllable rating, point of view,
// and source overlap, so the whole pipeline runs without proprietary data.
struct SynthConfig {
  int n_products = 220;
  int reviews_per_product = 13;
  int n_annotated = 60;
  int annotated_train = 28;
  int annotated_valid = 12;
  int annotated_test = 20;
  uint64_t seed = 1234;
};

struct SynthOutput {
  std::vector<Review> reviews;
  AnnotatedSet annotated;
};

SynthOutput generate_synth_corpus(const SynthConfig& cfg);

}  // namespace fewsum
