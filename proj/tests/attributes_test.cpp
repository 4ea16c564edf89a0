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

#include <gtest/gtest.h>

#include "invrat/attributes.hpp"
#include "test_util.hpp"

namespace invrat {
namespace {

using testing::make_doc;
using testing::TempDir;
using testing::write_text;

AttributeLexicon small_lexicon() {
  return AttributeLexicon({"muslim", "gay"}, {"f*g"}, {"f*ck", "sh*t"});
}

DialectLexicon small_dialects(double aae = 1.0, double wae = 1.0) {
  return DialectLexicon({{{{"finna", aae}, {"tryna", aae}},
                          {{"yall", wae}},
                          {{"ese", 1.0}}}});
}

TEST(TagLexical, SwearWordIsOnlyOni) {
  Vocabulary v;
  auto d = make_doc("a", "what the f*ck", 1, v);
  EXPECT_EQ(tag_lexical(d, small_lexicon()), AttributeSet({Attribute::kOni}));
}

TEST(TagLexical, UnionOfMatchedCategories) {
  Vocabulary v;
  auto d = make_doc("a", "that muslim guy is full of sh*t", 0, v);
  EXPECT_EQ(tag_lexical(d, small_lexicon()),
            AttributeSet({Attribute::kNoi, Attribute::kOni}));
}

TEST(TagLexical, NoMatchesGivesEmptySet) {
  Vocabulary v;
  auto d = make_doc("a", "have a nice day", 0, v);
  EXPECT_TRUE(tag_lexical(d, small_lexicon()).empty());
}

TEST(TagLexical, ResultIsSubsetOfWordAttributes) {
  // Every tagged attribute must be witnessed by some word in the document.
  const auto lex = small_lexicon();
  const std::vector<std::string> pool = {"muslim", "gay", "f*g", "f*ck", "sh*t",
                                         "the", "cat", "sat", "ok"};
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) text += pool[rng() % pool.size()] + " ";
    Vocabulary v;
    const auto d = make_doc("r", text, 0, v);
    AttributeSet witnessed;
    for (const auto& w : d.words) {
      if (auto a = lex.lookup(w)) witnessed.insert(*a);
    }
    EXPECT_EQ(tag_lexical(d, lex), witnessed) << text;
  }
}

TEST(Lexicon, RejectsWordInTwoCategories) {
  EXPECT_THROW(AttributeLexicon({"gay"}, {"gay"}, {}), Error);
}

TEST(Lexicon, RejectsUnnormalizedEntry) {
  EXPECT_THROW(AttributeLexicon({"Gay"}, {}, {}), Error);
}

TEST(Lexicon, LoadsFilesWithComments) {
  TempDir dir("lex");
  write_text(dir / "noi.txt", "# identity\nmuslim\n\ngay\n");
  write_text(dir / "oi.txt", "f*g\n");
  write_text(dir / "oni.txt", "sh*t # swear\n#hashtag\n");
  const auto lex = AttributeLexicon::load(dir.path());
  EXPECT_EQ(lex.size(), 4u);
  EXPECT_EQ(lex.lookup("sh*t"), Attribute::kOni);
  EXPECT_FALSE(lex.contains("#hashtag"));
}

TEST(Lexicon, MissingFileIsIoError) {
  TempDir dir("lex");
  write_text(dir / "noi.txt", "muslim\n");
  try {
    AttributeLexicon::load(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST(Lexicon, BadWeightReportsLine) {
  TempDir dir("lex");
  write_text(dir / "w.txt", "finna\t2\nbruh\tlots\n");
  try {
    read_lexicon_file(dir / "w.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Lexicon, ShippedListsLoad) {
  const std::filesystem::path dir = std::filesystem::path(INVRAT_SOURCE_DIR) / "data/lexicons";
  const auto lex = AttributeLexicon::load(dir);
  EXPECT_EQ(lex.lookup("muslim"), Attribute::kNoi);
  EXPECT_EQ(lex.lookup("f*ck"), Attribute::kOni);
  EXPECT_NO_THROW(DialectLexicon::load(dir));
}

TEST(TagDialect, ArgmaxOfMarkers) {
  Vocabulary v;
  auto d = make_doc("a", "we finna go tryna eat", 0, v);
  EXPECT_EQ(tag_dialect(d, small_dialects()), Dialect::kAae);
}

TEST(TagDialect, NoMarkersIsOther) {
  Vocabulary v;
  auto d = make_doc("a", "we are going to eat", 0, v);
  EXPECT_EQ(tag_dialect(d, small_dialects()), Dialect::kOther);
}

TEST(TagDialect, TieGoesToAae) {
  Vocabulary v;
  auto d = make_doc("a", "yall finna eat", 0, v);
  EXPECT_EQ(tag_dialect(d, small_dialects()), Dialect::kAae);
}

TEST(TagDialect, WeightsBreakTies) {
  Vocabulary v;
  auto d = make_doc("a", "yall finna eat", 0, v);
  EXPECT_EQ(tag_dialect(d, small_dialects(1.0, 2.0)), Dialect::kWae);
}

TEST(AssignEnvironment, LexicalPrecedence) {
  Document d;
  d.attributes = {Attribute::kNoi, Attribute::kOni};
  EXPECT_EQ(assign_environment(d, EnvironmentKind::kLexical).index, 0);
  d.attributes = {Attribute::kNoi, Attribute::kOi, Attribute::kOni};
  EXPECT_EQ(assign_environment(d, EnvironmentKind::kLexical).index, 1);
  d.attributes = {Attribute::kOni};
  EXPECT_EQ(assign_environment(d, EnvironmentKind::kLexical).index, 2);
  d.attributes = {};
  EXPECT_EQ(assign_environment(d, EnvironmentKind::kLexical).index,
            EnvironmentId::kLexicalNone);
}

TEST(AssignEnvironment, DialectIndex) {
  Document d;
  d.dialect = Dialect::kAae;
  EXPECT_EQ(assign_environment(d, EnvironmentKind::kDialectal).index, 0);
  d.dialect = Dialect::kHispanic;
  EXPECT_EQ(assign_environment(d, EnvironmentKind::kDialectal).index, 2);
  d.dialect.reset();
  EXPECT_EQ(assign_environment(d, EnvironmentKind::kDialectal).index, 3);
}

TEST(AssignEnvironment, AlwaysInRange) {
  for (unsigned bits = 0; bits < 8; ++bits) {
    Document d;
    for (Attribute a : kAllAttributes) {
      if (bits & (1u << static_cast<unsigned>(a))) d.attributes.insert(a);
    }
    const int e = assign_environment(d, EnvironmentKind::kLexical).index;
    EXPECT_GE(e, 0);
    EXPECT_LT(e, EnvironmentId::kNumEnvironments);
  }
}

TEST(EnvironmentIdTest, RejectsOutOfRange) {
  EXPECT_THROW(EnvironmentId(EnvironmentKind::kLexical, 4), Error);
  EXPECT_THROW(EnvironmentId(EnvironmentKind::kLexical, -1), Error);
}

TEST(TagDocument, DialectColumnWins) {
  Vocabulary v;
  auto d = make_doc("a", "finna finna", 0, v);
  d.dialect = Dialect::kWae;
  d.dialect_from_column = true;
  tag_document(d, small_lexicon(), nullptr, EnvironmentKind::kDialectal);
  // Precondition of the next assertion: the proxy would have said AAE.
  ASSERT_EQ(tag_dialect(d, small_dialects()), Dialect::kAae);
  auto dlex = small_dialects();
  tag_document(d, small_lexicon(), &dlex, EnvironmentKind::kDialectal);
  EXPECT_EQ(d.dialect, Dialect::kWae);
  EXPECT_EQ(d.environment, 1);
}

TEST(TagDocument, FillsAttributesAndEnvironment) {
  Vocabulary v;
  auto d = make_doc("a", "gay and sh*t", 1, v);
  auto dlex = small_dialects();
  tag_document(d, small_lexicon(), &dlex, EnvironmentKind::kLexical);
  EXPECT_TRUE(d.attributes_tagged);
  EXPECT_EQ(d.environment, 0);
  EXPECT_EQ(d.dialect, Dialect::kOther);
}

TEST(RemoveLexicon, DropsLexiconTokens) {
  Vocabulary v;
  auto d = make_doc("a", "you are sh*t", 1, v);
  const auto out = remove_lexicon_tokens(d, small_lexicon());
  EXPECT_EQ(out.words, (std::vector<std::string>{"you", "are"}));
  EXPECT_EQ(out.tokens, (std::vector<int>{v.id("you"), v.id("are")}));
  EXPECT_EQ(out.label, 1);
}

TEST(RemoveLexicon, IdentityWithoutMatches) {
  Vocabulary v;
  auto d = make_doc("a", "you are nice", 0, v);
  const auto out = remove_lexicon_tokens(d, small_lexicon());
  EXPECT_EQ(out.words, d.words);
  EXPECT_EQ(out.tokens, d.tokens);
}

TEST(RemoveLexicon, AllLexiconBecomesPad) {
  Vocabulary v;
  auto d = make_doc("a", "sh*t f*ck", 1, v);
  const auto out = remove_lexicon_tokens(d, small_lexicon());
  EXPECT_EQ(out.tokens, std::vector<int>{Vocabulary::kPad});
}

TEST(RemoveLexicon, NoLexiconWordSurvives) {
  const auto lex = small_lexicon();
  const std::vector<std::string> pool = {"muslim", "f*g", "sh*t", "a", "b", "c"};
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) text += pool[rng() % pool.size()] + " ";
    Vocabulary v;
    const auto out = remove_lexicon_tokens(make_doc("r", text, 0, v), lex);
    EXPECT_FALSE(out.words.empty());
    EXPECT_EQ(out.words.size(), out.tokens.size());
    for (const auto& w : out.words) EXPECT_FALSE(lex.contains(w)) << text;
  }
}

}  // namespace
}  // namespace invrat
