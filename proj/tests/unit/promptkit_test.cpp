#include <fstream>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "msprompt/bench.hpp"
#include "msprompt/errors.hpp"
#include "msprompt/promptkit.hpp"
#include "synth.hpp"

namespace msprompt {
namespace {

std::vector<PseudoImage> images_for(std::vector<ModalityKind> kinds) {
  std::vector<PseudoImage> out;
  for (auto k : kinds) {
    PseudoImage img;
    img.kind = k;
    img.descriptor = modality_descriptor(k);
    out.push_back(img);
  }
  return out;
}

std::vector<PseudoImage> all_images() { return images_for({kAllModalities.begin(), kAllModalities.end()}); }

std::size_t count_lines(const std::string& text, const std::regex& re) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += std::regex_search(line, re);
  return n;
}

const std::regex kBandLine(R"(^B(0[1-9]|1[12]|8A): )");
const std::regex kDescriptorLine(R"(^\[Image \d+\] )");

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

const ClassVocabulary& ben19() {
  static const ClassVocabulary v = ClassVocabulary::load(data_dir() / "vocab" / "bigearthnet19.json");
  return v;
}

ClassVocabulary two_guides() {
  return ClassVocabulary(TaskKind::MultiLabel, {{"Agro-forestry", "Trees mixed with crops/pasture"},
                                                {"Arable land", "Cultivated land showing geometric patterns"}});
}

PromptStrategy variant(PromptVariant v) {
  PromptStrategy s;
  s.variant = v;
  return s;
}

TEST(BandCatalog, EntriesAndFormatting) {
  const auto cat = band_catalog();
  ASSERT_EQ(cat.size(), 12u);
  std::set<BandId> seen;
  for (const auto& e : cat) {
    seen.insert(e.band);
    EXPECT_EQ(e.resolution_m, catalog_resolution_m(e.band));
  }
  EXPECT_EQ(seen.size(), 12u);
  EXPECT_EQ(cat.front().band, BandId::B02);
  std::string all;
  for (const auto& e : cat) all += format_catalog_line(e) + "\n";
  EXPECT_NE(all.find("B05: Red Edge (704.1nm, 20m)"), std::string::npos);
  EXPECT_NE(all.find("B06: Red Edge (740.5nm, 20m)"), std::string::npos);
  EXPECT_NE(all.find("B07: Red Edge (782.8nm, 20m)"), std::string::npos);
  EXPECT_NE(all.find("B11: SWIR (1613.7nm, 20m)"), std::string::npos);
  EXPECT_NE(all.find("B12: SWIR (2202.4nm, 20m)"), std::string::npos);
  EXPECT_NE(all.find("B02: Blue (10m)"), std::string::npos);
}

TEST(Vocabulary, Validation) {
  EXPECT_THROW(ClassVocabulary(TaskKind::MultiLabel, {}), EmptyVocabulary);
  EXPECT_THROW(ClassVocabulary(TaskKind::MultiLabel, {{"A", {}}, {"A", {}}}), InvalidVocabulary);
  EXPECT_THROW(ClassVocabulary(TaskKind::MultiLabel, {{" ", {}}}), InvalidVocabulary);
  EXPECT_THROW(ClassVocabulary::from_json_text("{\"classes\": 3}"), InvalidVocabulary);
  EXPECT_THROW(ClassVocabulary::load("/nonexistent/vocab.json"), MissingFile);
  const auto v = ClassVocabulary::from_json_text(
      R"({"task": "multi-class", "classes": [{"name": "A", "definition": "x"}, {"name": "B"}]})");
  EXPECT_EQ(v.task(), TaskKind::MultiClass);
  EXPECT_TRUE(v.contains("B"));
  EXPECT_FALSE(v.has_all_definitions());
}

TEST(Vocabulary, ShippedFiles) {
  EXPECT_EQ(ben19().size(), 19u);
  EXPECT_EQ(ben19().task(), TaskKind::MultiLabel);
  EXPECT_TRUE(ben19().has_all_definitions());
  const auto eurosat = ClassVocabulary::load(data_dir() / "vocab" / "eurosat.json");
  EXPECT_EQ(eurosat.size(), 10u);
  EXPECT_EQ(eurosat.task(), TaskKind::MultiClass);
  EXPECT_TRUE(eurosat.has_all_definitions());
}

TEST(Templates, RenderAndErrors) {
  EXPECT_EQ(render_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}}), "a 1 b 2");
  EXPECT_THROW(render_template("{{z}}", {{"x", "1"}}), UnboundPlaceholder);
  EXPECT_THROW(render_template("text {{x", {{"x", "1"}}), UnboundPlaceholder);
}

TEST(Templates, BuiltinMatchesDataFiles) {
  EXPECT_EQ(TemplateSet::builtin().main, testing::read_file(data_dir() / "templates" / "prompt.txt"));
  EXPECT_EQ(TemplateSet::builtin().cot, testing::read_file(data_dir() / "templates" / "cot.txt"));
}

TEST(Templates, LoadDirectoryOverrides) {
  testing::TempDir dir;
  std::ofstream(dir / "prompt.txt") << "CUSTOM {{class_list}} {{images_phrase}}";
  const auto set = TemplateSet::load_directory(dir.path());
  EXPECT_EQ(set.cot, TemplateSet::builtin().cot);
  const auto text = build_prompt(all_images(), ben19(), variant(PromptVariant::Baseline), set).instruction_text;
  EXPECT_EQ(text.rfind("CUSTOM", 0), 0u);
  std::ofstream(dir / "prompt.txt", std::ios::trunc) << "{{unknown}}";
  EXPECT_THROW(build_prompt(all_images(), ben19(), {}, TemplateSet::load_directory(dir.path())), UnboundPlaceholder);
}

TEST(Baseline, FullModalitySet) {
  const auto bundle = build_baseline_prompt(all_images(), ben19(), {});
  const auto& t = bundle.instruction_text;
  EXPECT_EQ(count_lines(t, kBandLine), 12u);
  EXPECT_EQ(count_lines(t, kDescriptorLine), 6u);
  for (const auto& c : ben19().classes()) EXPECT_NE(t.find("- " + c.name + "\n"), std::string::npos) << c.name;
  EXPECT_NE(t.find("more than one class is possible as an output"), std::string::npos);
  EXPECT_NE(t.find("ANSWER: <class>; <class>; ..."), std::string::npos);
  EXPECT_EQ(t.find("{{"), std::string::npos);
  EXPECT_EQ(t.find("Step 1"), std::string::npos);
  EXPECT_EQ(t.find("(1) "), std::string::npos);
}

TEST(Baseline, NoBandCatalog) {
  PromptStrategy s;
  s.include_band_catalog = false;
  const auto t = build_baseline_prompt(all_images(), ben19(), s).instruction_text;
  EXPECT_EQ(count_lines(t, kBandLine), 0u);
  EXPECT_EQ(count_lines(t, kDescriptorLine), 6u);
}

TEST(Baseline, RgbOnly) {
  const auto t = build_baseline_prompt(images_for({ModalityKind::TrueColor}), ben19(), {}).instruction_text;
  EXPECT_EQ(count_lines(t, kDescriptorLine), 1u);
  EXPECT_NE(t.find("[Image 1] RGB: Composited from B04, B03, B02"), std::string::npos);
  EXPECT_NE(t.find("1 image "), std::string::npos);
}

TEST(Baseline, NdwiLineNamesBandsRangeAndColormap) {
  const auto t = build_baseline_prompt(images_for({ModalityKind::NDWI}), ben19(), {}).instruction_text;
  const auto start = t.find("[Image 1]");
  ASSERT_NE(start, std::string::npos);
  const std::string line = t.substr(start, t.find('\n', start) - start);
  for (const char* part : {"B03", "B08", "-0.8 to 0.8", "(1, 1, 1) to (0, 0, 1)"}) {
    EXPECT_NE(line.find(part), std::string::npos) << part << " in " << line;
  }
}

TEST(Baseline, MultiClassDirective) {
  const auto eurosat = ClassVocabulary::load(data_dir() / "vocab" / "eurosat.json");
  const auto t = build_baseline_prompt(all_images(), eurosat, {}).instruction_text;
  EXPECT_EQ(t.find("more than one class is possible"), std::string::npos);
  EXPECT_NE(t.find("choose exactly one class"), std::string::npos);
}

TEST(Baseline, Errors) {
  EXPECT_THROW(build_baseline_prompt({}, ben19(), {}), NoImages);
  EXPECT_THROW(build_baseline_prompt(all_images(), ClassVocabulary(), {}), EmptyVocabulary);
}

TEST(Baseline, ImageReferencesMatchImageCount) {
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<ModalityKind> kinds(kAllModalities.begin(), kAllModalities.begin() + n);
    for (bool desc : {true, false}) {
      for (auto v : {PromptVariant::Baseline, PromptVariant::Expansion, PromptVariant::CoT}) {
        PromptStrategy s = variant(v);
        s.include_image_descriptors = desc;
        const auto b = build_prompt(images_for(kinds), ben19(), s);
        EXPECT_EQ(count_of(b.instruction_text, "[Image "), n);
        EXPECT_EQ(b.images.size(), n);
      }
    }
  }
}

TEST(Baseline, ImagesSortedCanonically) {
  const auto b = build_baseline_prompt(images_for({ModalityKind::NDMI2, ModalityKind::TrueColor}), ben19(), {});
  EXPECT_EQ(b.images[0].kind, ModalityKind::TrueColor);
  EXPECT_EQ(b.images[1].kind, ModalityKind::NDMI2);
  EXPECT_LT(b.instruction_text.find("RGB:"), b.instruction_text.find("NDMI-2"));
}

TEST(Expansion, ExampleGuides) {
  const auto t = build_expansion_prompt(all_images(), two_guides(), variant(PromptVariant::Expansion)).instruction_text;
  EXPECT_NE(t.find("(1) Agro-forestry: Trees mixed with crops/pasture"), std::string::npos);
  EXPECT_NE(t.find("(2) Arable land: Cultivated land showing geometric patterns"), std::string::npos);
}

TEST(Expansion, NineteenGuidesAndMissingDefinition) {
  const auto t = build_expansion_prompt(all_images(), ben19(), variant(PromptVariant::Expansion)).instruction_text;
  EXPECT_EQ(count_lines(t, std::regex(R"(^\(\d+\) )")), 19u);
  EXPECT_NE(t.find("(19) Marine waters: "), std::string::npos);
  const ClassVocabulary partial(TaskKind::MultiLabel, {{"A", "def"}, {"B", std::nullopt}});
  try {
    build_expansion_prompt(all_images(), partial, variant(PromptVariant::Expansion));
    FAIL() << "expected MissingDefinition";
  } catch (const MissingDefinition& e) {
    EXPECT_EQ(e.class_name(), "B");
  }
}

TEST(Expansion, ContainsBaselineClassList) {
  const auto base = build_baseline_prompt(all_images(), ben19(), {}).instruction_text;
  const auto exp = build_expansion_prompt(all_images(), ben19(), variant(PromptVariant::Expansion)).instruction_text;
  const auto a = base.find("The possible classes are:");
  const auto list = base.substr(a, base.find("\n\n", a) - a);
  EXPECT_NE(exp.find(list), std::string::npos);
  EXPECT_GT(exp.size(), base.size());
}

TEST(CoT, StepsAndCitation) {
  const auto t = build_cot_prompt(all_images(), ben19(), variant(PromptVariant::CoT)).instruction_text;
  for (const char* s : {"Step 1: Propose", "Step 2: Verify", "Step 3: Conclude", "list 2-3 potential classes",
                        "You MUST cite which image(s)", "Analyze, Confirm, and Synthesize"}) {
    EXPECT_NE(t.find(s), std::string::npos) << s;
  }
  EXPECT_NE(t.find("examination of the 6 images"), std::string::npos);
  // The reasoning block follows the image descriptions.
  EXPECT_LT(t.find("[Image 6]"), t.find("Step 1: Propose"));
  EXPECT_EQ(t.find("(1) "), std::string::npos);
}

TEST(CoT, AblationFlags) {
  PromptStrategy no_bands = variant(PromptVariant::CoT);
  no_bands.include_band_catalog = false;
  auto t = build_cot_prompt(all_images(), ben19(), no_bands).instruction_text;
  EXPECT_EQ(count_lines(t, kBandLine), 0u);
  EXPECT_NE(t.find("You MUST cite which image(s)"), std::string::npos);

  PromptStrategy no_desc = variant(PromptVariant::CoT);
  no_desc.include_image_descriptors = false;
  t = build_cot_prompt(all_images(), ben19(), no_desc).instruction_text;
  EXPECT_EQ(count_lines(t, kDescriptorLine), 0u);
  for (auto k : kAllModalities) EXPECT_EQ(t.find(modality_descriptor(k)), std::string::npos);
  EXPECT_EQ(count_lines(t, kBandLine), 12u);
  EXPECT_NE(t.find("Step 3: Conclude"), std::string::npos);
}

TEST(CoT, ComposesWithGuidesWhenAsked) {
  PromptStrategy s = variant(PromptVariant::CoT);
  s.include_class_guides = true;
  const auto t = build_cot_prompt(all_images(), two_guides(), s).instruction_text;
  EXPECT_NE(t.find("Step 2: Verify"), std::string::npos);
  EXPECT_NE(t.find("(1) Agro-forestry: Trees mixed with crops/pasture"), std::string::npos);
}

TEST(Prompts, Deterministic) {
  for (auto v : {PromptVariant::Baseline, PromptVariant::Expansion, PromptVariant::CoT}) {
    EXPECT_EQ(build_prompt(all_images(), ben19(), variant(v)).instruction_text,
              build_prompt(all_images(), ben19(), variant(v)).instruction_text);
  }
  EXPECT_EQ(parse_variant("chain-of-thought"), PromptVariant::CoT);
  EXPECT_EQ(parse_variant("expansion"), PromptVariant::Expansion);
  EXPECT_THROW(parse_variant("few-shot"), ConfigError);
}

}  // namespace
}  // namespace msprompt
