#include "msprompt/promptkit.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "msprompt/builtin_templates.hpp"
#include "msprompt/errors.hpp"

namespace msprompt {

namespace {

constexpr std::array<BandCatalogEntry, 12> kCatalog = {{
    {BandId::B02, "Blue", std::nullopt, 10},
    {BandId::B03, "Green", std::nullopt, 10},
    {BandId::B04, "Red", std::nullopt, 10},
    {BandId::B05, "Red Edge", 704.1, 20},
    {BandId::B06, "Red Edge", 740.5, 20},
    {BandId::B07, "Red Edge", 782.8, 20},
    {BandId::B08, "NIR", std::nullopt, 10},
    {BandId::B8A, "Narrow NIR", std::nullopt, 20},
    {BandId::B01, "Coastal Aerosol", std::nullopt, 60},
    {BandId::B09, "Water Vapor", std::nullopt, 60},
    {BandId::B11, "SWIR", 1613.7, 20},
    {BandId::B12, "SWIR", 2202.4, 20},
}};

std::string fold(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Empty sections leave runs of blank lines behind; fold them to one.
std::string tidy(std::string text) {
  std::string out;
  out.reserve(text.size());
  std::size_t newlines = 0;
  for (char c : text) {
    if (c == '\n') {
      if (++newlines > 2) continue;
    } else {
      newlines = 0;
    }
    out.push_back(c);
  }
  const auto first = out.find_first_not_of("\n ");
  const auto last = out.find_last_not_of("\n ");
  if (first == std::string::npos) return {};
  return out.substr(first, last - first + 1) + "\n";
}

void check_inputs(const std::vector<PseudoImage>& images, const ClassVocabulary& vocabulary) {
  if (images.empty()) throw NoImages("a prompt needs at least one image");
  if (vocabulary.size() == 0) throw EmptyVocabulary("a prompt needs at least one class");
}

std::string images_phrase(std::size_t n) {
  return std::to_string(n) + (n == 1 ? " image" : " images");
}

std::string band_catalog_block() {
  std::string out =
      "The Sentinel-2 band composition is listed below, noting the central wavelength and/or spatial "
      "resolution in parentheses:\n";
  for (const auto& entry : kCatalog) out += format_catalog_line(entry) + "\n";
  return out;
}

std::string image_block(const std::vector<PseudoImage>& images, bool with_descriptors) {
  std::string out;
  if (with_descriptors) {
    out = "The images were created as follows:\n";
    for (std::size_t i = 0; i < images.size(); ++i) {
      out += image_reference(i + 1) + " " + images[i].descriptor + "\n";
    }
    return out;
  }
  out = "The images are provided in this order: ";
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (i) out += ", ";
    out += image_reference(i + 1);
  }
  return out + ".\n";
}

std::string class_list_block(const ClassVocabulary& vocabulary) {
  std::string out = "The possible classes are:\n";
  for (const auto& c : vocabulary.classes()) out += "- " + c.name + "\n";
  return out;
}

std::string class_guides_block(const ClassVocabulary& vocabulary) {
  std::string out = "Use the following class guides to tell similar classes apart:\n";
  std::size_t n = 1;
  for (const auto& c : vocabulary.classes()) {
    if (!c.definition || c.definition->empty()) throw MissingDefinition(c.name);
    out += "(" + std::to_string(n++) + ") " + c.name + ": " + *c.definition + "\n";
  }
  return out;
}

std::string task_directive(TaskKind task) {
  if (task == TaskKind::MultiLabel) {
    return "This is a multi-label task: more than one class is possible as an output. Report every class "
           "present in the scene.";
  }
  return "This is a single-label task: choose exactly one class for the scene.";
}

std::string answer_directive(TaskKind task) {
  if (task == TaskKind::MultiLabel) {
    return "End your response with a single final line of the form\n"
           "ANSWER: <class>; <class>; ...\n"
           "using class names exactly as listed above.";
  }
  return "End your response with a single final line of the form\n"
         "ANSWER: <class>\n"
         "using a class name exactly as listed above.";
}

PromptBundle assemble(std::vector<PseudoImage> images, const ClassVocabulary& vocabulary,
                      const PromptStrategy& strategy, const TemplateSet& templates, bool with_guides,
                      bool with_cot) {
  check_inputs(images, vocabulary);
  std::ranges::stable_sort(images, {}, &PseudoImage::kind);

  std::map<std::string, std::string> b;
  b["images_phrase"] = images_phrase(images.size());
  b["band_catalog"] = strategy.include_band_catalog ? band_catalog_block() : "";
  b["image_descriptions"] = image_block(images, strategy.include_image_descriptors);
  b["reasoning"] = with_cot ? render_template(templates.cot, {{"images_phrase", b["images_phrase"]}}) : "";
  b["class_list"] = class_list_block(vocabulary);
  b["class_guides"] = with_guides ? class_guides_block(vocabulary) : "";
  b["task_directive"] = task_directive(vocabulary.task());
  b["answer_directive"] = answer_directive(vocabulary.task());

  PromptBundle bundle;
  bundle.instruction_text = tidy(render_template(templates.main, b));
  bundle.images = std::move(images);
  bundle.strategy = strategy;
  return bundle;
}

}  // namespace

std::span<const BandCatalogEntry> band_catalog() noexcept { return kCatalog; }

std::string format_catalog_line(const BandCatalogEntry& entry) {
  std::string out = std::string(band_code(entry.band)) + ": " + std::string(entry.name) + " (";
  if (entry.central_wavelength_nm) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1fnm, ", *entry.central_wavelength_nm);
    out += buf;
  }
  return out + std::to_string(entry.resolution_m) + "m)";
}

std::string_view task_kind_name(TaskKind kind) noexcept {
  return kind == TaskKind::MultiLabel ? "multi-label" : "multi-class";
}

TaskKind parse_task_kind(std::string_view text) {
  const auto key = fold(text);
  if (key == "multilabel") return TaskKind::MultiLabel;
  if (key == "multiclass") return TaskKind::MultiClass;
  throw ConfigError("unknown task kind: " + std::string(text));
}

ClassVocabulary::ClassVocabulary(TaskKind task, std::vector<VocabularyClass> classes)
    : task_(task), classes_(std::move(classes)) {
  if (classes_.empty()) throw EmptyVocabulary("vocabulary has no classes");
  std::set<std::string> seen;
  for (const auto& c : classes_) {
    if (c.name.find_first_not_of(" \t") == std::string::npos) throw InvalidVocabulary("empty class name");
    if (!seen.insert(c.name).second) throw InvalidVocabulary("duplicate class name: " + c.name);
  }
}

ClassVocabulary ClassVocabulary::from_json_text(std::string_view text) {
  using nlohmann::json;
  try {
    const json doc = json::parse(text);
    std::vector<VocabularyClass> classes;
    for (const auto& c : doc.at("classes")) {
      VocabularyClass vc{c.at("name").get<std::string>(), std::nullopt};
      if (auto d = c.find("definition"); d != c.end() && d->is_string()) vc.definition = d->get<std::string>();
      classes.push_back(std::move(vc));
    }
    return ClassVocabulary(parse_task_kind(doc.value("task", "multi-label")), std::move(classes));
  } catch (const json::exception& e) {
    throw InvalidVocabulary(std::string("malformed vocabulary: ") + e.what());
  }
}

ClassVocabulary ClassVocabulary::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingFile("vocabulary not found: " + path.string());
  return from_json_text(read_text(path));
}

bool ClassVocabulary::contains(std::string_view name) const noexcept {
  return std::ranges::any_of(classes_, [&](const auto& c) { return c.name == name; });
}

bool ClassVocabulary::has_all_definitions() const noexcept {
  return std::ranges::all_of(classes_, [](const auto& c) { return c.definition && !c.definition->empty(); });
}

std::string_view variant_name(PromptVariant v) noexcept {
  switch (v) {
    case PromptVariant::Baseline: return "Baseline";
    case PromptVariant::Expansion: return "Expansion";
    case PromptVariant::CoT: return "CoT";
  }
  return "Baseline";
}

PromptVariant parse_variant(std::string_view text) {
  const auto key = fold(text);
  if (key == "baseline") return PromptVariant::Baseline;
  if (key == "expansion" || key == "vocabularyexpansion") return PromptVariant::Expansion;
  if (key == "cot" || key == "chainofthought") return PromptVariant::CoT;
  throw ConfigError("unknown prompt strategy: " + std::string(text));
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw UnboundPlaceholder("unterminated placeholder in template");
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    auto it = bindings.find(name);
    if (it == bindings.end()) throw UnboundPlaceholder("template placeholder has no binding: {{" + name + "}}");
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set{std::string(kBuiltinMainTemplate), std::string(kBuiltinCotTemplate)};
  return set;
}

TemplateSet TemplateSet::load_directory(const std::filesystem::path& dir) {
  TemplateSet set = builtin();
  if (auto p = dir / "prompt.txt"; std::filesystem::exists(p)) set.main = read_text(p);
  if (auto p = dir / "cot.txt"; std::filesystem::exists(p)) set.cot = read_text(p);
  return set;
}

std::string image_reference(std::size_t position) { return "[Image " + std::to_string(position) + "]"; }

PromptBundle build_baseline_prompt(std::vector<PseudoImage> images, const ClassVocabulary& vocabulary,
                                   const PromptStrategy& strategy, const TemplateSet& templates) {
  return assemble(std::move(images), vocabulary, strategy, templates, false, false);
}

PromptBundle build_expansion_prompt(std::vector<PseudoImage> images, const ClassVocabulary& vocabulary,
                                    const PromptStrategy& strategy, const TemplateSet& templates) {
  return assemble(std::move(images), vocabulary, strategy, templates, true, false);
}

PromptBundle build_cot_prompt(std::vector<PseudoImage> images, const ClassVocabulary& vocabulary,
                              const PromptStrategy& strategy, const TemplateSet& templates) {
  return assemble(std::move(images), vocabulary, strategy, templates, strategy.class_guides_enabled(), true);
}

PromptBundle build_prompt(std::vector<PseudoImage> images, const ClassVocabulary& vocabulary,
                          const PromptStrategy& strategy, const TemplateSet& templates) {
  switch (strategy.variant) {
    case PromptVariant::Expansion: return build_expansion_prompt(std::move(images), vocabulary, strategy, templates);
    case PromptVariant::CoT: return build_cot_prompt(std::move(images), vocabulary, strategy, templates);
    case PromptVariant::Baseline: break;
  }
  return build_baseline_prompt(std::move(images), vocabulary, strategy, templates);
}

}  // namespace msprompt
