#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msprompt/promptkit.hpp"

namespace msprompt {

// Surface form -> canonical class name. Keys are matched after case and
// whitespace normalization.
using AliasTable = std::map<std::string, std::string>;
// JSON object {"SeaLake": "Sea Lake", ...}. Throws MissingFile / DecodeError.
AliasTable load_alias_table(const std::filesystem::path& path);

struct LabelSet {
  // Vocabulary names in order of first appearance; no duplicates.
  std::vector<std::string> labels;
  // Answer tokens that matched no class, verbatim.
  std::vector<std::string> unmatched;

  bool contains(std::string_view name) const noexcept;
  // Appends unless already present.
  void add(const std::string& name);
};

enum class ParseMode { AnswerLine, FullScan, Empty };
std::string_view parse_mode_name(ParseMode mode) noexcept;

struct ParseOutcome {
  LabelSet label_set;
  ParseMode mode = ParseMode::Empty;
};

struct ParseOptions {
  // Without an ANSWER line, restrict the fallback scan to text after the final
  // "Conclude" marker so Propose-step hypotheses are not harvested.
  bool cot = false;
  AliasTable aliases;
};

// Lower-case, whitespace runs collapsed to one space, trimmed.
std::string normalize_label_text(std::string_view text);

// Never throws for any text; an empty vocabulary throws EmptyVocabulary.
ParseOutcome parse_response(std::string_view text, const ClassVocabulary& vocabulary,
                            const ParseOptions& options = {});

// Resolves one label against the vocabulary with aliases applied.
std::optional<std::string> match_label(std::string_view token, const ClassVocabulary& vocabulary,
                                       const AliasTable& aliases);

}  // namespace msprompt
