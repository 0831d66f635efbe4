#include "fewsum/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace fewsum {

TokenSeq TokenSeq::from_ids(std::vector<int> v) {
  TokenSeq s;
  s.ids = std::move(v);
  s.length = 0;
  for (int id : s.ids)
    if (id != PAD) ++s.length;
  return s;
}

// ---------------------------------------------------------------------------
// Word / sentence tokenization
// ---------------------------------------------------------------------------

static bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
static bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> word_tokenize(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && is_space(text[i])) ++i;
    size_t j = i;
    while (j < n && !is_space(text[j])) ++j;
    if (j > i) {
      size_t a = i, b = j;
      while (a < b && is_punct(text[a])) ++a;
      while (b > a && is_punct(text[b - 1])) --b;
      if (b > a) {
        std::string w = text.substr(a, b - a);
        for (char& c : w) c = char(std::tolower(static_cast<unsigned char>(c)));
        out.push_back(std::move(w));
      }
    }
    i = j;
  }
  return out;
}

int count_words(const std::string& text) {
  int count = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

static bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

std::vector<std::string> sentence_split(const std::string& text) {
  std::vector<std::string> out;
  const size_t n = text.size();
  size_t start = 0;
  size_t i = 0;
  auto flush = [&](size_t end) {
    size_t a = start, b = end;
    while (a < b && is_space(text[a])) ++a;
    while (b > a && is_space(text[b - 1])) --b;
    if (b > a) out.push_back(text.substr(a, b - a));
    start = end;
  };
  while (i < n) {
    if (is_terminator(text[i])) {
      // A run of terminators (e.g. "...") counts as one boundary.
      size_t j = i;
      while (j < n && is_terminator(text[j])) ++j;
      if (j >= n || is_space(text[j])) {
        flush(j);
        i = j;
        continue;
      }
      i = j;
      continue;
    }
    ++i;
  }
  flush(n);
  return out;
}

// ---------------------------------------------------------------------------
// BPE
// ---------------------------------------------------------------------------

// Splits a UTF-8 string into code-point symbols.
static std::vector<std::string> utf8_chars(const std::string& word) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < word.size()) {
    unsigned char c = static_cast<unsigned char>(word[i]);
    size_t len = 1;
    if ((c & 0x80) == 0x00) len = 1;
    else if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    if (i + len > word.size()) len = 1;
    out.push_back(word.substr(i, len));
    i += len;
  }
  return out;
}

static std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

void BpeModel::index_symbols(const std::vector<std::string>& alphabet) {
  id_to_symbol_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (const auto& a : alphabet) id_to_symbol_.push_back(a);
  for (const auto& m : merges_) id_to_symbol_.push_back(m.first + m.second);
  symbol_to_id_.clear();
  for (int i = 0; i < int(id_to_symbol_.size()); ++i) symbol_to_id_[id_to_symbol_[size_t(i)]] = i;
  merge_rank_.clear();
  for (int r = 0; r < int(merges_.size()); ++r)
    merge_rank_[merges_[size_t(r)].first + "\x01" + merges_[size_t(r)].second] = r;
}

BpeModel BpeModel::train(const std::vector<std::string>& corpus, int merges) {
  if (merges < 0) fail("train_bpe: merges must be >= 0");
  // Word frequency table. A word is a whitespace token; case is preserved.
  std::map<std::string, long long> word_freq;
  for (const auto& line : corpus)
    for (auto& w : split_whitespace(line)) ++word_freq[w];
  if (word_freq.empty()) fail("train_bpe: empty corpus");

  // Each word starts as its code points plus the end-of-word marker.
  std::vector<std::vector<std::string>> words;
  std::vector<long long> freqs;
  std::map<std::string, int> alphabet_set;
  for (const auto& [w, f] : word_freq) {
    auto syms = utf8_chars(w);
    syms.push_back(kEndOfWord);
    for (const auto& s : syms) alphabet_set[s] = 1;
    words.push_back(std::move(syms));
    freqs.push_back(f);
  }

  BpeModel model;
  for (int step = 0; step < merges; ++step) {
    std::map<std::pair<std::string, std::string>, long long> pair_freq;
    for (size_t k = 0; k < words.size(); ++k) {
      const auto& w = words[k];
      for (size_t i = 0; i + 1 < w.size(); ++i) pair_freq[{w[i], w[i + 1]}] += freqs[k];
    }
    if (pair_freq.empty()) break;
    // Most frequent pair; lexicographically smallest on ties. std::map keeps
    // keys ordered, so the first maximal entry is the lexicographic winner.
    std::pair<std::string, std::string> best;
    long long best_freq = -1;
    for (const auto& [p, f] : pair_freq) {
      if (f > best_freq) {
        best = p;
        best_freq = f;
      }
    }
    model.merges_.push_back(best);
    for (auto& w : words) {
      std::vector<std::string> merged;
      merged.reserve(w.size());
      size_t i = 0;
      while (i < w.size()) {
        if (i + 1 < w.size() && w[i] == best.first && w[i + 1] == best.second) {
          merged.push_back(best.first + best.second);
          i += 2;
        } else {
          merged.push_back(w[i]);
          ++i;
        }
      }
      w = std::move(merged);
    }
  }

  std::vector<std::string> alphabet;
  for (const auto& [s, _] : alphabet_set) alphabet.push_back(s);
  model.index_symbols(alphabet);
  return model;
}

std::vector<std::string> BpeModel::encode_word(const std::string& word) const {
  auto syms = utf8_chars(word);
  syms.push_back(kEndOfWord);
  // Apply merges in rank order: repeatedly merge the lowest-ranked pair present.
  while (syms.size() >= 2) {
    int best_rank = -1;
    size_t best_pos = 0;
    for (size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = merge_rank_.find(syms[i] + "\x01" + syms[i + 1]);
      if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_rank < 0) break;
    syms[best_pos] = syms[best_pos] + syms[best_pos + 1];
    syms.erase(syms.begin() + long(best_pos) + 1);
  }
  return syms;
}

TokenSeq BpeModel::encode(const std::string& text, bool add_bos_eos) const {
  std::vector<int> ids;
  if (add_bos_eos) ids.push_back(BOS);
  for (const auto& word : split_whitespace(text)) {
    for (const auto& sym : encode_word(word)) {
      auto it = symbol_to_id_.find(sym);
      ids.push_back(it == symbol_to_id_.end() ? int(UNK) : it->second);
    }
  }
  if (add_bos_eos) ids.push_back(EOS);
  return TokenSeq::from_ids(std::move(ids));
}

std::string BpeModel::decode(const TokenSeq& seq) const {
  std::string out;
  for (size_t pos = 0; pos < seq.ids.size(); ++pos) {
    int id = seq.ids[pos];
    if (id < 0 || id >= vocab_size())
      fail("decode: token id " + std::to_string(id) + " out of range at position " +
           std::to_string(pos));
    if (id < kNumSpecials) continue;
    const std::string& sym = id_to_symbol_[size_t(id)];
    const std::string eow = kEndOfWord;
    if (sym.size() >= eow.size() && sym.compare(sym.size() - eow.size(), eow.size(), eow) == 0) {
      out += sym.substr(0, sym.size() - eow.size());
      out += ' ';
    } else {
      out += sym;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

int BpeModel::symbol_id(const std::string& sym) const {
  auto it = symbol_to_id_.find(sym);
  return it == symbol_to_id_.end() ? -1 : it->second;
}

void BpeModel::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) fail("BpeModel::save: cannot open " + path);
  os << "#bpe-model 1\n";
  os << "#specials <pad> <bos> <eos> <unk>\n";
  os << "#alphabet";
  // Alphabet symbols sit between the specials and the merge products.
  int alpha_end = vocab_size() - merge_count();
  for (int i = kNumSpecials; i < alpha_end; ++i) os << ' ' << id_to_symbol_[size_t(i)];
  os << "\n";
  for (const auto& m : merges_) os << m.first << ' ' << m.second << "\n";
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail("BpeModel::load: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("#bpe-model", 0) != 0)
    fail("BpeModel::load: missing version header in " + path);
  if (!std::getline(is, line) || line.rfind("#specials", 0) != 0)
    fail("BpeModel::load: missing specials header in " + path);
  if (!std::getline(is, line) || line.rfind("#alphabet", 0) != 0)
    fail("BpeModel::load: missing alphabet header in " + path);
  std::vector<std::string> alphabet;
  {
    std::istringstream as(line.substr(9));
    std::string s;
    while (as >> s) alphabet.push_back(s);
  }
  BpeModel model;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto sp = line.find(' ');
    if (sp == std::string::npos) fail("BpeModel::load: malformed merge line: " + line);
    model.merges_.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  model.index_symbols(alphabet);
  return model;
}

}  // namespace fewsum
