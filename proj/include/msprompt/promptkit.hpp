#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msprompt/raster.hpp"
#include "msprompt/spectral.hpp"

namespace msprompt {

struct BandCatalogEntry {
  BandId band;
  std::string_view name;
  std::optional<double> central_wavelength_nm;
  int resolution_m;
};

// The 12 L2A bands in prompt listing order.
std::span<const BandCatalogEntry> band_catalog() noexcept;
// "B05: Red Edge (704.1nm, 20m)"
std::string format_catalog_line(const BandCatalogEntry& entry);

enum class TaskKind { MultiLabel, MultiClass };
std::string_view task_kind_name(TaskKind kind) noexcept;
// "multi-label" / "multi-class". Throws ConfigError.
TaskKind parse_task_kind(std::string_view text);

struct VocabularyClass {
  std::string name;
  std::optional<std::string> definition;
};

class ClassVocabulary {
 public:
  ClassVocabulary() = default;
  // Throws EmptyVocabulary or InvalidVocabulary (empty / duplicate names).
  ClassVocabulary(TaskKind task, std::vector<VocabularyClass> classes);

  // {"task": "multi-label", "classes": [{"name": ..., "definition": ...}]}
  static ClassVocabulary load(const std::filesystem::path& path);
  static ClassVocabulary from_json_text(std::string_view text);

  TaskKind task() const noexcept { return task_; }
  const std::vector<VocabularyClass>& classes() const noexcept { return classes_; }
  std::size_t size() const noexcept { return classes_.size(); }
  bool contains(std::string_view name) const noexcept;
  bool has_all_definitions() const noexcept;

 private:
  TaskKind task_ = TaskKind::MultiLabel;
  std::vector<VocabularyClass> classes_;
};

enum class PromptVariant { Baseline, Expansion, CoT };
std::string_view variant_name(PromptVariant v) noexcept;
// Throws ConfigError.
PromptVariant parse_variant(std::string_view text);

struct PromptStrategy {
  PromptVariant variant = PromptVariant::Baseline;
  bool include_band_catalog = true;
  bool include_image_descriptors = true;
  // Unset means "on for Expansion, off otherwise". Setting it on a CoT
  // strategy composes CoT with the class guides.
  std::optional<bool> include_class_guides;

  bool class_guides_enabled() const noexcept {
    return include_class_guides.value_or(variant == PromptVariant::Expansion);
  }
  friend bool operator==(const PromptStrategy&, const PromptStrategy&) = default;
};

struct PromptBundle {
  std::vector<PseudoImage> images;
  std::string instruction_text;
  PromptStrategy strategy;
};

// Replaces every {{name}} marker. Throws UnboundPlaceholder when a marker has
// no binding or is left unterminated.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& bindings);

// Editable prompt text. `main` lays out the sections; `cot` is the
// three-step reasoning block.
struct TemplateSet {
  std::string main;
  std::string cot;

  static const TemplateSet& builtin();
  // Reads prompt.txt and cot.txt; missing files fall back to the builtin text.
  static TemplateSet load_directory(const std::filesystem::path& dir);
};

// Throws NoImages / EmptyVocabulary.
PromptBundle build_baseline_prompt(std::vector<PseudoImage> images, const ClassVocabulary& vocabulary,
                                   const PromptStrategy& strategy,
                                   const TemplateSet& templates = TemplateSet::builtin());
// Additionally throws MissingDefinition.
PromptBundle build_expansion_prompt(std::vector<PseudoImage> images, const ClassVocabulary& vocabulary,
                                    const PromptStrategy& strategy,
                                    const TemplateSet& templates = TemplateSet::builtin());
PromptBundle build_cot_prompt(std::vector<PseudoImage> images, const ClassVocabulary& vocabulary,
                              const PromptStrategy& strategy, const TemplateSet& templates = TemplateSet::builtin());
// Dispatches on strategy.variant.
PromptBundle build_prompt(std::vector<PseudoImage> images, const ClassVocabulary& vocabulary,
                          const PromptStrategy& strategy, const TemplateSet& templates = TemplateSet::builtin());

// "[Image 3]"; the only form in which prompts refer to images.
std::string image_reference(std::size_t position);

}  // namespace msprompt
