#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "msprompt/bench.hpp"
#include "msprompt/errors.hpp"
#include "msprompt/parse.hpp"

namespace msprompt {
namespace {

ClassVocabulary vocab(std::vector<std::string> names, TaskKind task = TaskKind::MultiLabel) {
  std::vector<VocabularyClass> classes;
  for (auto& n : names) classes.push_back({n, std::nullopt});
  return ClassVocabulary(task, std::move(classes));
}

std::string upper(std::string s) {
  std::ranges::transform(s, s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

TEST(Parse, AnswerLine) {
  const auto v = vocab({"Arable land", "Pastures", "Forest"});
  const auto out = parse_response("The fields look ploughed.\nANSWER: Arable land; Pastures", v);
  EXPECT_EQ(out.mode, ParseMode::AnswerLine);
  EXPECT_EQ(out.label_set.labels, (std::vector<std::string>{"Arable land", "Pastures"}));
  EXPECT_TRUE(out.label_set.unmatched.empty());
}

TEST(Parse, FullScanFallback) {
  const auto out = parse_response("the scene is clearly a Forest", vocab({"Forest", "River"}));
  EXPECT_EQ(out.mode, ParseMode::FullScan);
  EXPECT_EQ(out.label_set.labels, (std::vector<std::string>{"Forest"}));
}

TEST(Parse, UnmatchedTokensKeptVerbatim) {
  const auto out = parse_response("ANSWER: Swamp", vocab({"Forest"}));
  EXPECT_EQ(out.mode, ParseMode::AnswerLine);
  EXPECT_TRUE(out.label_set.labels.empty());
  EXPECT_EQ(out.label_set.unmatched, (std::vector<std::string>{"Swamp"}));
}

TEST(Parse, EmptyText) {
  for (const char* t : {"", "   \n\t  "}) {
    const auto out = parse_response(t, vocab({"Forest"}));
    EXPECT_EQ(out.mode, ParseMode::Empty);
    EXPECT_TRUE(out.label_set.labels.empty());
  }
  EXPECT_THROW(parse_response("x", ClassVocabulary()), EmptyVocabulary);
}

TEST(Parse, LastAnswerLineWins) {
  const auto v = vocab({"Forest", "River", "Pasture"});
  const auto out = parse_response("ANSWER: Forest\nOn reflection...\nANSWER: River; Pasture\n", v);
  EXPECT_EQ(out.label_set.labels, (std::vector<std::string>{"River", "Pasture"}));
}

TEST(Parse, AnswerLineDecorationsAndCase) {
  const auto v = vocab({"Inland waters", "Marine waters"});
  for (const char* t : {"**ANSWER:** inland   WATERS ; Marine waters.", "answer: Inland waters;Marine waters",
                        "  > Answer : `Inland waters`; \"Marine waters\"", "ANSWER: Inland waters; Marine waters; "}) {
    const auto out = parse_response(t, v);
    EXPECT_EQ(out.mode, ParseMode::AnswerLine) << t;
    EXPECT_EQ(out.label_set.labels, (std::vector<std::string>{"Inland waters", "Marine waters"})) << t;
    EXPECT_TRUE(out.label_set.unmatched.empty()) << t;
  }
}

TEST(Parse, DuplicatesCollapse) {
  const auto out = parse_response("ANSWER: Forest; forest; FOREST", vocab({"Forest"}));
  EXPECT_EQ(out.label_set.labels.size(), 1u);
}

TEST(Parse, Aliases) {
  ParseOptions opt;
  opt.aliases = {{"SeaLake", "Sea Lake"}, {"Sea or Lake", "Sea Lake"}, {"Ghost", "Not A Class"}};
  const auto v = vocab({"Sea Lake", "River"}, TaskKind::MultiClass);
  EXPECT_EQ(parse_response("ANSWER: SeaLake", v, opt).label_set.labels, (std::vector<std::string>{"Sea Lake"}));
  EXPECT_EQ(parse_response("ANSWER: sea or  lake", v, opt).label_set.labels, (std::vector<std::string>{"Sea Lake"}));
  EXPECT_EQ(parse_response("This looks like a sealake to me", v, opt).label_set.labels,
            (std::vector<std::string>{"Sea Lake"}));
  const auto ghost = parse_response("ANSWER: Ghost", v, opt);
  EXPECT_TRUE(ghost.label_set.labels.empty());
  EXPECT_EQ(ghost.label_set.unmatched, (std::vector<std::string>{"Ghost"}));
}

TEST(Parse, ShippedEurosatAliases) {
  ParseOptions opt;
  opt.aliases = load_alias_table(data_dir() / "aliases" / "eurosat.json");
  const auto v = ClassVocabulary::load(data_dir() / "vocab" / "eurosat.json");
  EXPECT_EQ(parse_response("ANSWER: AnnualCrop", v, opt).label_set.labels, (std::vector<std::string>{"Annual Crop"}));
  EXPECT_EQ(parse_response("ANSWER: Sea/Lake", v, opt).label_set.labels, (std::vector<std::string>{"Sea Lake"}));
}

TEST(Parse, ShadowingSafety) {
  const auto v = vocab({"Permanent crops", "crops", "Forest", "Mixed forest"});
  auto out = parse_response("I see Permanent crops and a mixed forest.", v);
  EXPECT_EQ(out.mode, ParseMode::FullScan);
  EXPECT_EQ(out.label_set.labels, (std::vector<std::string>{"Permanent crops", "Mixed forest"}));
  out = parse_response("mostly crops near a forest", v);
  EXPECT_EQ(out.label_set.labels, (std::vector<std::string>{"crops", "Forest"}));
}

TEST(Parse, ShadowingPropertyOverShippedVocabulary) {
  const auto v = ClassVocabulary::load(data_dir() / "vocab" / "bigearthnet19.json");
  for (const auto& longer : v.classes()) {
    const auto out = parse_response("The scene shows " + longer.name + " throughout.", v);
    EXPECT_EQ(out.label_set.labels, (std::vector<std::string>{longer.name})) << longer.name;
  }
}

TEST(Parse, WordBoundaries) {
  const auto out = parse_response("deforestation everywhere", vocab({"Forest"}));
  EXPECT_TRUE(out.label_set.labels.empty());
  EXPECT_EQ(out.mode, ParseMode::FullScan);
}

TEST(Parse, CotFallbackScansAfterConclude) {
  const auto v = vocab({"Forest", "River", "Pastures"});
  const std::string text =
      "Step 1: Propose: Forest, River or Pastures could fit.\n"
      "Step 2: Verify: no water visible in the NDWI image.\n"
      "Step 3: Conclude: the scene is Pastures.";
  ParseOptions cot;
  cot.cot = true;
  EXPECT_EQ(parse_response(text, v, cot).label_set.labels, (std::vector<std::string>{"Pastures"}));
  EXPECT_EQ(parse_response(text, v).label_set.labels.size(), 3u);
  // Without a Conclude marker CoT scans everything.
  EXPECT_EQ(parse_response("Forest and River", v, cot).label_set.labels.size(), 2u);
}

TEST(Parse, VocabularyClosureAndIdempotence) {
  const auto v = ClassVocabulary::load(data_dir() / "vocab" / "bigearthnet19.json");
  std::mt19937_64 rng(17);
  const std::vector<std::string> words = {"ANSWER:",  "Forest", "forest", "Pastures",   "Urban", "fabric", ";",
                                          "\n",       "water",  "Inland", "waters",     "Arable", "land",  "Swamp",
                                          "Conclude", "Mixed",  "crops",  "Coniferous", "ANSWER"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const int n = std::uniform_int_distribution<int>(0, 30)(rng);
    for (int i = 0; i < n; ++i) text += words[rng() % words.size()] + (rng() % 3 ? " " : "");
    ParseOptions opt;
    opt.cot = trial % 2;
    const auto a = parse_response(text, v, opt);
    const auto b = parse_response(text, v, opt);
    EXPECT_EQ(a.label_set.labels, b.label_set.labels);
    EXPECT_EQ(a.mode, b.mode);
    for (const auto& l : a.label_set.labels) EXPECT_TRUE(v.contains(l)) << l;
    auto sorted = [](std::vector<std::string> x) { std::ranges::sort(x); return x; };
    EXPECT_EQ(sorted(parse_response(upper(text), v, opt).label_set.labels), sorted(a.label_set.labels)) << text;
  }
}

TEST(Parse, NormalizeLabelText) {
  EXPECT_EQ(normalize_label_text("  Sea \t\n Lake "), "sea lake");
  EXPECT_EQ(normalize_label_text(""), "");
}

TEST(Parse, AliasTableErrors) {
  EXPECT_THROW(load_alias_table("/nonexistent/aliases.json"), MissingFile);
}

}  // namespace
}  // namespace msprompt
