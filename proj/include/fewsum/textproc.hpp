#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fewsum/common.hpp"

namespace fewsum {

// Special token ids occupy fixed low slots in every vocab.
enum SpecialToken : int { PAD = 0, BOS = 1, EOS = 2, UNK = 3 };
constexpr int kNumSpecials = 4;

struct TokenSeq {
  std::vector<int> ids;
  int length = 0;  // token count excluding PAD

  static TokenSeq from_ids(std::vector<int> v);
};

// Subword model: ordered merge list over word-internal symbols with an
// explicit end-of-word marker, plus a dense symbol->id vocabulary.
class BpeModel {
 public:
  static constexpr const char* kEndOfWord = "</w>";

  // Frequency-greedy training; ties on pair frequency break lexicographically.
  static BpeModel train(const std::vector<std::string>& corpus, int merges);

  TokenSeq encode(const std::string& text, bool add_bos_eos) const;
  std::string decode(const TokenSeq& seq) const;

  int vocab_size() const { return int(id_to_symbol_.size()); }
  int merge_count() const { return int(merges_.size()); }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  int symbol_id(const std::string& sym) const;  // -1 when absent

  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, int> symbol_to_id_;
  std::vector<std::string> id_to_symbol_;
  std::unordered_map<std::string, int> merge_rank_;

  void index_symbols(const std::vector<std::string>& alphabet);
  std::vector<std::string> encode_word(const std::string& word) const;
};

// Lowercased whitespace tokens with leading/trailing punctuation stripped.
std::vector<std::string> word_tokenize(const std::string& text);

// Splits on {. ! ?} runs followed by whitespace/end; keeps delimiters.
std::vector<std::string> sentence_split(const std::string& text);

int count_words(const std::string& text);

}  // namespace fewsum
