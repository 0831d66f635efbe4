#include "fewsum/synth.hpp"

#include <algorithm>

#include "fewsum/textproc.hpp"

namespace fewsum {

namespace {

struct CategorySpec {
  const char* name;
  std::vector<const char*> nouns;
  std::vector<const char*> aspects;
};

const std::vector<CategorySpec>& categories() {
  static const std::vector<CategorySpec> cats = {
      {"kitchen",
       {"blender", "kettle", "toaster", "skillet"},
       {"motor", "lid", "handle", "blades", "finish", "cord"}},
      {"electronics",
       {"speaker", "charger", "keyboard", "headset"},
       {"battery", "sound", "cable", "buttons", "display", "firmware"}},
      {"outdoors",
       {"tent", "backpack", "lantern", "stove"},
       {"zipper", "straps", "fabric", "poles", "seams", "buckles"}},
      {"health",
       {"razor", "lotion", "shampoo", "brush"},
       {"scent", "texture", "packaging", "bristles", "formula", "pump"}}};
  return cats;
}

const std::vector<const char*>& pos_adjs() {
  static const std::vector<const char*> v = {"great", "solid", "excellent", "reliable", "smooth",
                                             "sturdy"};
  return v;
}
const std::vector<const char*>& neg_adjs() {
  static const std::vector<const char*> v = {"poor", "weak", "flimsy", "noisy", "disappointing",
                                             "fragile"};
  return v;
}
const std::vector<const char*>& mid_adjs() {
  static const std::vector<const char*> v = {"decent", "average", "acceptable", "plain"};
  return v;
}

const char* pick(Rng& rng, const std::vector<const char*>& pool) {
  return pool[size_t(rng.next_int(int(pool.size())))];
}

const char* adj_for(Rng& rng, int rating) {
  if (rating >= 4) return pick(rng, pos_adjs());
  if (rating == 3) return pick(rng, mid_adjs());
  return pick(rng, neg_adjs());
}

struct ProductSpec {
  std::string id;
  const CategorySpec* category;
  const char* noun;
  std::vector<const char*> aspects;  // 3 per product
  int base_rating;
};

ProductSpec make_product(Rng& rng, int index) {
  ProductSpec p;
  p.id = "p" + std::to_string(index);
  p.category = &categories()[size_t(index) % categories().size()];
  p.noun = pick(rng, p.category->nouns);
  std::vector<int> idx = rng.sample_without_replacement(int(p.category->aspects.size()), 3);
  for (int i : idx) p.aspects.push_back(p.category->aspects[size_t(i)]);
  int roll = rng.next_int(10);
  p.base_rating = roll < 3 ? 5 : roll < 6 ? 4 : roll < 8 ? 3 : roll < 9 ? 2 : 1;
  return p;
}

int review_rating(Rng& rng, const ProductSpec& p) {
  int delta_roll = rng.next_int(5);
  int delta = delta_roll == 0 ? -1 : delta_roll == 4 ? 1 : 0;
  return std::clamp(p.base_rating + delta, 1, 5);
}

std::string filler_sentence(Rng& rng) {
  switch (rng.next_int(4)) {
    case 0: {
      static const std::vector<const char*> days = {"two", "three", "five"};
      static const std::vector<const char*> box = {"fine", "dented", "oversized"};
      return std::string("shipping took ") + pick(rng, days) + " days and the box arrived " +
             pick(rng, box) + " .";
    }
    case 1: {
      static const std::vector<const char*> manual = {"short", "confusing", "helpful"};
      static const std::vector<const char*> setup = {"minutes", "hours"};
      return std::string("the manual was ") + pick(rng, manual) + " and setup took only " +
             pick(rng, setup) + " .";
    }
    case 2: {
      static const std::vector<const char*> store = {"store", "website", "market"};
      static const std::vector<const char*> compare = {"cheaper", "pricier"};
      return std::string("the local ") + pick(rng, store) + " sells a " + pick(rng, compare) +
             " model next to this one .";
    }
    default: {
      static const std::vector<const char*> when = {"last spring", "this winter", "a while back"};
      return std::string("the old unit from ") + pick(rng, when) + " finally gave out .";
    }
  }
}

// POV styles: 0 first person, 1 second person, 2 third person, 3 pronoun-free.
int pick_style(Rng& rng) {
  int roll = rng.next_int(100);
  if (roll < 55) return 0;
  if (roll < 65) return 1;
  if (roll < 85) return 2;
  return 3;
}

std::string review_text(Rng& rng, const ProductSpec& p, int rating) {
  const bool good = rating >= 4;
  const int style = pick_style(rng);
  std::vector<std::string> sentences;

  switch (style) {
    case 0: {
      static const std::vector<const char*> when = {"week", "month"};
      sentences.push_back(std::string("i bought this ") + p.noun + " about a " +
                          pick(rng, when) + " ago and i am " + (good ? "happy" : "upset") +
                          " with the purchase .");
      break;
    }
    case 1:
      sentences.push_back(std::string("you will ") + (good ? "love" : "regret") + " this " +
                          p.noun + " if you order one .");
      break;
    case 2:
      sentences.push_back(std::string("it is a ") + adj_for(rng, rating) + " " + p.noun +
                          " and it works " + (good ? "well" : "poorly") + " for daily use .");
      break;
    default:
      sentences.push_back(std::string("a ") + adj_for(rng, rating) + " " + p.noun +
                          " for the price .");
      break;
  }

  sentences.push_back(std::string("the ") + p.aspects[0] + " is " + adj_for(rng, rating) +
                      " and the " + p.aspects[1] + " feels " + adj_for(rng, rating) + " .");
  sentences.push_back(std::string("the ") + p.aspects[2] + " looks " + adj_for(rng, rating) +
                      " after regular use .");

  switch (style) {
    case 0: {
      static const std::vector<const char*> who = {"friend", "husband", "wife", "sister"};
      if (rng.next_int(2) == 0)
        sentences.push_back(std::string("i would ") + (good ? "recommend" : "return") +
                            " it without hesitation .");
      else
        sentences.push_back(std::string("my ") + pick(rng, who) + " " +
                            (good ? "likes" : "hates") + " it too .");
      break;
    }
    case 1:
      sentences.push_back("you get what you pay for here .");
      break;
    case 2:
      sentences.push_back(std::string("it deserves ") + (good ? "top" : "low") +
                          " marks from this review .");
      break;
    default:
      sentences.push_back(std::string(good ? "strong" : "weak") + " value overall .");
      break;
  }

  auto word_total = [&]() {
    int total = 0;
    for (const auto& s : sentences) total += count_words(s);
    return total;
  };
  while (word_total() < 22) sentences.push_back(filler_sentence(rng));

  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

std::string summary_text(Rng& rng, const ProductSpec& p, int variant) {
  const bool good = p.base_rating >= 4;
  const char* overall = adj_for(rng, p.base_rating);
  const char* a1 = adj_for(rng, p.base_rating);
  const char* a2 = adj_for(rng, p.base_rating);
  const char* a3 = adj_for(rng, p.base_rating);
  const char* verdict = good ? "recommend" : "avoid";
  switch (variant % 3) {
    case 0:
      return std::string("this ") + p.noun + " is " + overall + " overall . the " + p.aspects[0] +
             " is " + a1 + " and the " + p.aspects[1] + " is " + a2 + " . most buyers find the " +
             p.aspects[2] + " " + a3 + " and would " + verdict + " it .";
    case 1:
      return std::string("overall a ") + overall + " " + p.noun + " . buyers mention that the " +
             p.aspects[0] + " is " + a1 + " and the " + p.aspects[1] + " seems " + a2 +
             " . most find the " + p.aspects[2] + " " + a3 + " and would " + verdict + " it .";
    default:
      return std::string("the ") + p.noun + " comes across as " + overall +
             " . reviewers describe the " + p.aspects[0] + " as " + a1 + " and the " +
             p.aspects[1] + " as " + a2 + " . the " + p.aspects[2] + " gets " + a3 +
             " remarks and most would " + verdict + " it .";
  }
}

}  // namespace

SynthOutput generate_synth_corpus(const SynthConfig& cfg) {
  if (cfg.annotated_train + cfg.annotated_valid + cfg.annotated_test != cfg.n_annotated)
    fail("generate_synth_corpus: split sizes must sum to n_annotated");
  Rng rng(cfg.seed);
  SynthOutput out;

  for (int pi = 0; pi < cfg.n_products; ++pi) {
    ProductSpec p = make_product(rng, pi);
    for (int ri = 0; ri < cfg.reviews_per_product; ++ri) {
      Review r;
      r.id = p.id + "_r" + std::to_string(ri);
      r.product_id = p.id;
      r.category = p.category->name;
      r.rating = review_rating(rng, p);
      r.text = review_text(rng, p, r.rating);
      out.reviews.push_back(std::move(r));
    }
  }

  // Annotated entries use fresh products (8 source reviews, 3 references),
  // interleaved over categories so each split covers every category.
  for (int ai = 0; ai < cfg.n_annotated; ++ai) {
    ProductSpec p = make_product(rng, cfg.n_products + ai);
    AnnotatedEntry e;
    e.group_id = "g" + std::to_string(ai);
    e.category = p.category->name;
    for (int ri = 0; ri < 8; ++ri) {
      Review r;
      r.id = p.id + "_s" + std::to_string(ri);
      r.product_id = p.id;
      r.category = p.category->name;
      r.rating = review_rating(rng, p);
      r.text = review_text(rng, p, r.rating);
      e.sources.push_back(std::move(r));
    }
    for (int si = 0; si < 3; ++si) e.references.push_back(summary_text(rng, p, si));
    e.split = ai < cfg.annotated_train                       ? Split::kTrain
              : ai < cfg.annotated_train + cfg.annotated_valid ? Split::kValid
                                                               : Split::kTest;
    out.annotated.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace fewsum
