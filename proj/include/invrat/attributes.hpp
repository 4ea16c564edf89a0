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

// Lexical and dialectal attribute tagging, environment assignment and the
// lexical-removal baseline.

#ifndef INVRAT_ATTRIBUTES_HPP_
#define INVRAT_ATTRIBUTES_HPP_

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "invrat/corpus.hpp"
#include "invrat/error.hpp"

namespace invrat {

enum class EnvironmentKind { kLexical, kDialectal };

inline const char* environment_kind_name(EnvironmentKind k) {
  return k == EnvironmentKind::kLexical ? "lexical" : "dialectal";
}

inline std::optional<EnvironmentKind> parse_environment_kind(
    std::string_view s) {
  if (s == "lexical") return EnvironmentKind::kLexical;
  if (s == "dialectal" || s == "dialect") return EnvironmentKind::kDialectal;
  return std::nullopt;
}

// Lexical: 0 = nOI, 1 = OI, 2 = OnI, 3 = none of the above.
// Dialectal: 0 = AAE, 1 = WAE, 2 = Hispanic, 3 = Other.
struct EnvironmentId {
  static constexpr int kNumEnvironments = 4;
  static constexpr int kLexicalNone = 3;

  EnvironmentKind kind = EnvironmentKind::kLexical;
  int index = 0;

  EnvironmentId() = default;
  EnvironmentId(EnvironmentKind k, int i) : kind(k), index(i) {
    if (i < 0 || i >= kNumEnvironments) {
      throw Error(ErrorKind::kOutOfRange,
                  "environment index " + std::to_string(i) + " not in 0..3");
    }
  }
  friend bool operator==(const EnvironmentId&, const EnvironmentId&) = default;
};

// ---------------------------------------------------------------------------
// Lexicon files
// ---------------------------------------------------------------------------

struct LexiconEntry {
  std::string word;
  double weight = 1.0;
};

// One entry per line, '#' starts a comment, optional `word<TAB>weight`.
inline std::vector<LexiconEntry> read_lexicon_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open lexicon " + path.string());
  std::vector<LexiconEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      // Keep '#' inside hashtags: only a leading '#' or one after whitespace
      // starts a comment.
      if (hash == 0 || std::isspace(static_cast<unsigned char>(line[hash - 1]))) {
        line.erase(hash);
      }
    }
    const auto fields = split_tabs(line);
    const auto words = normalize_words(fields[0]);
    if (words.empty()) continue;
    if (words.size() != 1) {
      throw ParseError(ErrorKind::kParse, line_no,
                       path.filename().string() + ": entry '" + fields[0] +
                           "' is not a single token");
    }
    LexiconEntry e{words[0], 1.0};
    if (fields.size() >= 2 && !normalize_words(fields[1]).empty()) {
      try {
        e.weight = std::stod(fields[1]);
      } catch (const std::exception&) {
        throw ParseError(ErrorKind::kParse, line_no, "bad weight '" + fields[1] + "'");
      }
      if (!(e.weight > 0.0)) {
        throw ParseError(ErrorKind::kParse, line_no, "weights must be positive");
      }
    }
    entries.push_back(e);
  }
  return entries;
}

class AttributeLexicon {
 public:
  AttributeLexicon() = default;

  AttributeLexicon(const std::vector<std::string>& noi,
                   const std::vector<std::string>& oi,
                   const std::vector<std::string>& oni) {
    add_all(Attribute::kNoi, noi);
    add_all(Attribute::kOi, oi);
    add_all(Attribute::kOni, oni);
  }

  // Expects noi.txt, oi.txt and oni.txt in `dir`.
  static AttributeLexicon load(const std::filesystem::path& dir) {
    auto words = [&](const char* name) {
      const auto path = dir / name;
      if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::kIo, "missing lexicon file " + path.string());
      }
      std::vector<std::string> out;
      for (auto& e : read_lexicon_file(path)) out.push_back(e.word);
      return out;
    };
    return AttributeLexicon(words("noi.txt"), words("oi.txt"), words("oni.txt"));
  }

  std::optional<Attribute> lookup(const std::string& word) const {
    auto it = words_.find(word);
    if (it == words_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const std::string& word) const { return words_.count(word) != 0; }
  std::size_t size() const { return words_.size(); }

 private:
  void add_all(Attribute a, const std::vector<std::string>& list) {
    for (const auto& raw : list) {
      const auto norm = normalize_words(raw);
      if (norm.size() != 1 || norm[0] != raw) {
        throw Error(ErrorKind::kInvalidArgument,
                    "lexicon entry '" + raw + "' is not normalized");
      }
      auto [it, inserted] = words_.emplace(raw, a);
      if (!inserted && it->second != a) {
        throw Error(ErrorKind::kInvalidArgument,
                    "lexicon entry '" + raw + "' appears in both " +
                        attribute_name(it->second) + " and " + attribute_name(a));
      }
    }
  }

  std::unordered_map<std::string, Attribute> words_;
};

class DialectLexicon {
 public:
  DialectLexicon() = default;

  // `markers[d]` holds (word, weight) pairs for AAE, WAE and Hispanic.
  explicit DialectLexicon(
      const std::array<std::vector<LexiconEntry>, 3>& markers) {
    for (std::size_t d = 0; d < markers.size(); ++d) {
      for (const auto& e : markers[d]) {
        const auto norm = normalize_words(e.word);
        if (norm.size() != 1 || norm[0] != e.word) {
          throw Error(ErrorKind::kInvalidArgument,
                      "dialect marker '" + e.word + "' is not normalized");
        }
        if (!(e.weight > 0.0)) {
          throw Error(ErrorKind::kInvalidArgument, "marker weights must be positive");
        }
        weights_[d][e.word] = e.weight;
      }
    }
  }

  // Expects dialect_aae.txt, dialect_wae.txt and dialect_hispanic.txt.
  static DialectLexicon load(const std::filesystem::path& dir) {
    std::array<std::vector<LexiconEntry>, 3> markers;
    const std::array<const char*, 3> names = {
        "dialect_aae.txt", "dialect_wae.txt", "dialect_hispanic.txt"};
    for (std::size_t d = 0; d < names.size(); ++d) {
      const auto path = dir / names[d];
      if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::kIo, "missing lexicon file " + path.string());
      }
      markers[d] = read_lexicon_file(path);
    }
    return DialectLexicon(markers);
  }

  double weight(std::size_t dialect, const std::string& word) const {
    auto it = weights_[dialect].find(word);
    return it == weights_[dialect].end() ? 0.0 : it->second;
  }

 private:
  std::array<std::unordered_map<std::string, double>, 3> weights_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline AttributeSet tag_lexical(const Document& doc, const AttributeLexicon& lex) {
  AttributeSet attrs;
  for (const auto& w : doc.words) {
    if (auto a = lex.lookup(w)) attrs.insert(*a);
  }
  return attrs;
}

inline Dialect tag_dialect(const Document& doc, const DialectLexicon& dlex) {
  std::array<double, 3> scores{};
  for (const auto& w : doc.words) {
    for (std::size_t d = 0; d < scores.size(); ++d) scores[d] += dlex.weight(d, w);
  }
  const double n = doc.words.empty() ? 1.0 : static_cast<double>(doc.words.size());
  std::size_t best = 0;
  for (std::size_t d = 0; d < scores.size(); ++d) {
    scores[d] /= n;
    // Strict comparison keeps the earlier dialect on ties.
    if (scores[d] > scores[best]) best = d;
  }
  if (scores[best] <= 0.0) return Dialect::kOther;
  return static_cast<Dialect>(best);
}

// Multi-attribute documents resolve OI > nOI > OnI.
inline EnvironmentId assign_environment(const Document& doc, EnvironmentKind kind) {
  if (kind == EnvironmentKind::kDialectal) {
    const Dialect d = doc.dialect.value_or(Dialect::kOther);
    return EnvironmentId(kind, static_cast<int>(d));
  }
  if (doc.attributes.contains(Attribute::kOi)) return EnvironmentId(kind, 1);
  if (doc.attributes.contains(Attribute::kNoi)) return EnvironmentId(kind, 0);
  if (doc.attributes.contains(Attribute::kOni)) return EnvironmentId(kind, 2);
  return EnvironmentId(kind, EnvironmentId::kLexicalNone);
}

// Tags attributes, fills the dialect (an existing dialect column wins over the
// proxy) and assigns the environment for `kind`.
inline void tag_document(Document& doc, const AttributeLexicon& lex,
                         const DialectLexicon* dlex, EnvironmentKind kind) {
  doc.attributes = tag_lexical(doc, lex);
  doc.attributes_tagged = true;
  if (!doc.dialect_from_column) {
    doc.dialect = dlex ? tag_dialect(doc, *dlex) : Dialect::kOther;
  }
  doc.environment = assign_environment(doc, kind).index;
}

inline Document remove_lexicon_tokens(Document doc, const AttributeLexicon& lex) {
  std::vector<std::string> words;
  std::vector<int> tokens;
  for (std::size_t i = 0; i < doc.words.size(); ++i) {
    if (lex.contains(doc.words[i])) continue;
    words.push_back(doc.words[i]);
    if (i < doc.tokens.size()) tokens.push_back(doc.tokens[i]);
  }
  if (words.empty()) {
    words.push_back("<pad>");
    tokens.assign(1, Vocabulary::kPad);
  }
  doc.words = std::move(words);
  doc.tokens = std::move(tokens);
  return doc;
}

}  // namespace invrat

#endif  // INVRAT_ATTRIBUTES_HPP_
