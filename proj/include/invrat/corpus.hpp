//
// Copyright 2026 The invrat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Documents, vocabulary, tokenization and TSV ingestion.

#ifndef INVRAT_CORPUS_HPP_
#define INVRAT_CORPUS_HPP_

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "invrat/error.hpp"
#include "json.hpp"

namespace invrat {

enum class Attribute : std::uint8_t { kNoi = 0, kOi = 1, kOni = 2 };
inline constexpr std::array<Attribute, 3> kAllAttributes = {
    Attribute::kNoi, Attribute::kOi, Attribute::kOni};

inline const char* attribute_name(Attribute a) {
  switch (a) {
    case Attribute::kNoi: return "nOI";
    case Attribute::kOi: return "OI";
    case Attribute::kOni: return "OnI";
  }
  return "?";
}

class AttributeSet {
 public:
  AttributeSet() = default;
  AttributeSet(std::initializer_list<Attribute> attrs) {
    for (Attribute a : attrs) insert(a);
  }

  void insert(Attribute a) { bits_ |= bit(a); }
  bool contains(Attribute a) const { return (bits_ & bit(a)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::uint8_t bits() const { return bits_; }
  bool is_subset_of(const AttributeSet& other) const {
    return (bits_ & ~other.bits_) == 0;
  }
  friend bool operator==(const AttributeSet&, const AttributeSet&) = default;

 private:
  static std::uint8_t bit(Attribute a) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(a));
  }
  std::uint8_t bits_ = 0;
};

enum class Dialect : std::uint8_t { kAae = 0, kWae = 1, kHispanic = 2, kOther = 3 };

inline const char* dialect_name(Dialect d) {
  switch (d) {
    case Dialect::kAae: return "aae";
    case Dialect::kWae: return "wae";
    case Dialect::kHispanic: return "hispanic";
    case Dialect::kOther: return "other";
  }
  return "?";
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

inline std::optional<Dialect> parse_dialect(std::string_view s) {
  const std::string v = ascii_lower(s);
  if (v == "aae") return Dialect::kAae;
  if (v == "wae") return Dialect::kWae;
  if (v == "hispanic") return Dialect::kHispanic;
  if (v == "other") return Dialect::kOther;
  return std::nullopt;
}

struct Document {
  std::string id;
  std::string raw_text;
  // Normalized surface tokens; ids below index into a Vocabulary.
  std::vector<std::string> words;
  std::vector<int> tokens;
  int label = 0;
  AttributeSet attributes;
  bool attributes_tagged = false;
  std::optional<Dialect> dialect;
  // True when the dialect came from an external column rather than the proxy.
  bool dialect_from_column = false;
  std::optional<int> environment;
};

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

// Characters that separate tokens and are dropped. Asterisks, apostrophes,
// '#', '@', '-' and '_' stay inside tokens so censored swear words ("f**k"),
// contractions, hashtags and mentions survive as single tokens.
inline bool is_split_char(unsigned char c) {
  if (std::isspace(c)) return true;
  if (c >= 0x80) return false;
  if (!std::ispunct(c)) return false;
  switch (c) {
    case '*':
    case '\'':
    case '#':
    case '@':
    case '-':
    case '_':
      return false;
    default:
      return true;
  }
}

// Lowercases and splits; never fails. An empty result is legal here and is
// rejected by `tokenize`.
inline std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_split_char(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kMasked = 2;
  static constexpr int kNumReserved = 3;

  Vocabulary() : tokens_{"<pad>", "<unk>", "<masked>"} {}

  // Appends a non-reserved token; returns its id. Duplicates are rejected to
  // keep the map bijective.
  int add(const std::string& token) {
    if (index_.count(token) != 0 || is_reserved_string(token)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "duplicate vocabulary entry '" + token + "'");
    }
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
  }

  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& token) const {
    return index_.count(token) != 0;
  }
  const std::string& token(int id) const {
    if (id < 0 || id >= size()) {
      throw Error(ErrorKind::kOutOfRange,
                  "token id " + std::to_string(id) + " outside vocabulary");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }
  int size() const { return static_cast<int>(tokens_.size()); }

  nlohmann::json to_json() const {
    return nlohmann::json(std::vector<std::string>(
        tokens_.begin() + kNumReserved, tokens_.end()));
  }
  static Vocabulary from_json(const nlohmann::json& j) {
    Vocabulary v;
    for (const auto& t : j) v.add(t.get<std::string>());
    return v;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  static bool is_reserved_string(const std::string& t) {
    return t == "<pad>" || t == "<unk>" || t == "<masked>";
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

inline std::vector<int> words_to_ids(const std::vector<std::string>& words,
                                     const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab.id(w));
  return ids;
}

inline std::vector<int> tokenize(std::string_view raw_text,
                                 const Vocabulary& vocab) {
  const auto words = normalize_words(raw_text);
  if (words.empty()) {
    throw Error(ErrorKind::kEmptyAfterTokenization,
                "text has no tokens after normalization");
  }
  return words_to_ids(words, vocab);
}

// Frequency-descending, then lexicographic.
inline Vocabulary build_vocab(const std::vector<std::string>& texts,
                              int min_count) {
  if (min_count < 1) {
    throw Error(ErrorKind::kInvalidArgument, "min_count must be >= 1");
  }
  std::map<std::string, std::int64_t> counts;
  for (const auto& t : texts) {
    for (auto& w : normalize_words(t)) ++counts[w];
  }
  if (counts.empty()) {
    throw Error(ErrorKind::kEmptyCorpus, "cannot build a vocabulary");
  }
  std::vector<std::pair<std::string, std::int64_t>> entries(counts.begin(),
                                                            counts.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  Vocabulary vocab;
  for (const auto& [word, count] : entries) {
    if (count >= min_count && !vocab.contains(word)) vocab.add(word);
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// TSV
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline std::optional<int> parse_label(std::string_view s) {
  const std::string v = ascii_lower(s);
  if (v == "0" || v == "non-toxic") return 0;
  if (v == "1" || v == "toxic") return 1;
  return std::nullopt;
}

inline std::string format_attributes(const AttributeSet& attrs) {
  std::string out;
  for (Attribute a : kAllAttributes) {
    if (!attrs.contains(a)) continue;
    if (!out.empty()) out += ',';
    out += attribute_name(a);
  }
  return out.empty() ? "none" : out;
}

inline std::optional<AttributeSet> parse_attributes(std::string_view s) {
  AttributeSet attrs;
  const std::string v = ascii_lower(s);
  if (v == "none" || v.empty()) return attrs;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "noi") attrs.insert(Attribute::kNoi);
    else if (item == "oi") attrs.insert(Attribute::kOi);
    else if (item == "oni") attrs.insert(Attribute::kOni);
    else return std::nullopt;
  }
  return attrs;
}

struct LoadedCorpus {
  std::vector<Document> docs;
  Vocabulary vocab;
  // Narrowest row's column count; 6 means every row carries attributes and
  // an environment column.
  std::size_t columns = 3;
};

// Reads `id<TAB>text<TAB>label[<TAB>dialect[<TAB>attributes<TAB>env]]`. When
// `vocab` is empty a vocabulary is built from this file's texts.
inline LoadedCorpus load_tsv(const std::filesystem::path& path,
                             std::optional<Vocabulary> vocab = std::nullopt,
                             int min_count = 1) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open " + path.string());
  }
  LoadedCorpus out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t min_columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 3 || fields.size() > 6 || fields.size() == 5) {
      throw ParseError(ErrorKind::kParse, line_no,
                       "expected 3, 4 or 6 tab-separated fields, got " +
                           std::to_string(fields.size()));
    }
    Document doc;
    doc.id = fields[0];
    if (doc.id.empty()) {
      throw ParseError(ErrorKind::kParse, line_no, "empty id");
    }
    doc.raw_text = fields[1];
    doc.words = normalize_words(doc.raw_text);
    if (doc.words.empty()) {
      throw ParseError(ErrorKind::kEmptyAfterTokenization, line_no,
                       "document '" + doc.id + "' is empty after tokenization");
    }
    const auto label = parse_label(fields[2]);
    if (!label) {
      throw ParseError(ErrorKind::kUnknownLabel, line_no,
                       "unknown label '" + fields[2] + "'");
    }
    doc.label = *label;
    if (fields.size() >= 4 && !fields[3].empty() && fields[3] != "-") {
      const auto d = parse_dialect(fields[3]);
      if (!d) {
        throw ParseError(ErrorKind::kParse, line_no,
                         "unknown dialect '" + fields[3] + "'");
      }
      doc.dialect = d;
      doc.dialect_from_column = true;
    }
    if (fields.size() == 6) {
      const auto attrs = parse_attributes(fields[4]);
      if (!attrs) {
        throw ParseError(ErrorKind::kParse, line_no,
                         "bad attribute list '" + fields[4] + "'");
      }
      doc.attributes = *attrs;
      doc.attributes_tagged = true;
      if (fields[5] != "-") {
        int env = -1;
        try {
          std::size_t used = 0;
          env = std::stoi(fields[5], &used);
          if (used != fields[5].size()) env = -1;
        } catch (const std::exception&) {
          env = -1;
        }
        if (env < 0 || env > 3) {
          throw ParseError(ErrorKind::kParse, line_no,
                           "environment must be 0..3 or '-'");
        }
        doc.environment = env;
      }
    }
    min_columns = min_columns == 0 ? fields.size()
                                   : std::min(min_columns, fields.size());
    out.docs.push_back(std::move(doc));
  }
  if (out.docs.empty()) {
    throw Error(ErrorKind::kEmptyCorpus, path.string() + " has no rows");
  }
  // The narrowest row decides, so partially tagged files read as untagged.
  out.columns = min_columns;
  if (vocab) {
    out.vocab = std::move(*vocab);
  } else {
    std::vector<std::string> texts;
    texts.reserve(out.docs.size());
    for (const auto& d : out.docs) texts.push_back(d.raw_text);
    out.vocab = build_vocab(texts, min_count);
  }
  for (auto& d : out.docs) d.tokens = words_to_ids(d.words, out.vocab);
  return out;
}

inline std::string sanitize_field(std::string s) {
  for (char& c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

// Writes the tagged 6-column form when `tagged` is set, else 3 or 4 columns.
inline void write_tsv(const std::filesystem::path& path,
                      const std::vector<Document>& docs, bool tagged) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& d : docs) {
    out << sanitize_field(d.id) << '\t' << sanitize_field(d.raw_text) << '\t'
        << d.label;
    if (tagged) {
      out << '\t' << (d.dialect ? dialect_name(*d.dialect) : "-") << '\t'
          << format_attributes(d.attributes) << '\t'
          << (d.environment ? std::to_string(*d.environment) : "-");
    } else if (d.dialect_from_column && d.dialect) {
      out << '\t' << dialect_name(*d.dialect);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct DatasetSplit {
  std::vector<Document> train;
  std::vector<Document> dev;
  std::vector<Document> test;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
};

inline DatasetSplit split_dataset(std::vector<Document> docs,
                                  const std::array<double, 3>& fractions,
                                  std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "split fractions must be > 0");
    }
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, "split fractions must sum to 1");
  }
  const auto n = static_cast<long long>(docs.size());
  const long long n_train = std::llround(static_cast<double>(n) * fractions[0]);
  const long long n_dev = std::llround(static_cast<double>(n) * fractions[1]);
  const long long n_test = n - n_train - n_dev;
  if (n_train <= 0 || n_dev <= 0 || n_test <= 0) {
    throw Error(ErrorKind::kEmptySplit,
                "split of " + std::to_string(n) + " documents leaves a part empty");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = docs.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(docs[i - 1], docs[pick(rng)]);
  }
  DatasetSplit split;
  split.fractions = fractions;
  split.seed = seed;
  auto begin = std::make_move_iterator(docs.begin());
  split.train.assign(begin, begin + n_train);
  split.dev.assign(begin + n_train, begin + n_train + n_dev);
  split.test.assign(begin + n_train + n_dev, std::make_move_iterator(docs.end()));
  return split;
}

}  // namespace invrat

#endif  // INVRAT_CORPUS_HPP_
