#include "msprompt/parse.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

#include "msprompt/errors.hpp"

namespace msprompt {

namespace {

bool is_space(unsigned char c) noexcept { return std::isspace(c) != 0; }
bool is_word(unsigned char c) noexcept { return std::isalnum(c) != 0 || c >= 0x80; }

std::string_view trim(std::string_view s, std::string_view chars) {
  const auto first = s.find_first_not_of(chars);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(chars);
  return s.substr(first, last - first + 1);
}

constexpr std::string_view kTokenJunk = " \t\r\n*`'\".,:!<>[]";

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    lines.push_back(text.substr(pos, end - pos));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

// Returns the remainder after "ANSWER:" if the line is an answer line.
std::optional<std::string_view> answer_remainder(std::string_view line) {
  line = trim(line, " \t\r*#>-`_");
  constexpr std::string_view kWord = "answer";
  if (line.size() < kWord.size()) return std::nullopt;
  for (std::size_t i = 0; i < kWord.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(line[i])) != kWord[i]) return std::nullopt;
  }
  std::size_t i = kWord.size();
  while (i < line.size() && (line[i] == ' ' || line[i] == '*' || line[i] == '_')) ++i;
  if (i >= line.size() || line[i] != ':') return std::nullopt;
  return line.substr(i + 1);
}

struct Candidate {
  std::string surface;  // normalized
  std::string canonical;
};

std::vector<Candidate> scan_candidates(const ClassVocabulary& vocabulary, const AliasTable& aliases) {
  std::vector<Candidate> out;
  for (const auto& c : vocabulary.classes()) out.push_back({normalize_label_text(c.name), c.name});
  for (const auto& [surface, canonical] : aliases) {
    if (vocabulary.contains(canonical)) out.push_back({normalize_label_text(surface), canonical});
  }
  std::erase_if(out, [](const Candidate& c) { return c.surface.empty(); });
  std::ranges::sort(out, [](const Candidate& a, const Candidate& b) {
    if (a.surface.size() != b.surface.size()) return a.surface.size() > b.surface.size();
    return a.surface < b.surface;
  });
  return out;
}

std::size_t find_last_ci(std::string_view hay, std::string_view needle) {
  if (needle.size() > hay.size()) return std::string_view::npos;
  for (std::size_t i = hay.size() - needle.size() + 1; i-- > 0;) {
    bool ok = true;
    for (std::size_t j = 0; j < needle.size() && ok; ++j) {
      ok = std::tolower(static_cast<unsigned char>(hay[i + j])) == needle[j];
    }
    if (ok) return i;
  }
  return std::string_view::npos;
}

LabelSet full_scan(std::string_view region, const ClassVocabulary& vocabulary, const AliasTable& aliases) {
  const std::string text = normalize_label_text(region);
  std::vector<bool> taken(text.size(), false);
  std::vector<std::pair<std::size_t, std::string>> hits;

  for (const auto& cand : scan_candidates(vocabulary, aliases)) {
    for (auto pos = text.find(cand.surface); pos != std::string::npos; pos = text.find(cand.surface, pos + 1)) {
      const auto end = pos + cand.surface.size();
      const bool left_ok = pos == 0 || !is_word(static_cast<unsigned char>(text[pos - 1]));
      const bool right_ok = end == text.size() || !is_word(static_cast<unsigned char>(text[end]));
      if (!left_ok || !right_ok) continue;
      if (std::any_of(taken.begin() + static_cast<std::ptrdiff_t>(pos),
                      taken.begin() + static_cast<std::ptrdiff_t>(end), [](bool b) { return b; })) {
        continue;
      }
      std::fill(taken.begin() + static_cast<std::ptrdiff_t>(pos), taken.begin() + static_cast<std::ptrdiff_t>(end),
                true);
      hits.emplace_back(pos, cand.canonical);
    }
  }
  std::ranges::sort(hits);
  LabelSet set;
  for (const auto& [pos, name] : hits) set.add(name);
  return set;
}

}  // namespace

AliasTable load_alias_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("alias table not found: " + path.string());
  try {
    return nlohmann::json::parse(in).get<AliasTable>();
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError("malformed alias table " + path.string() + ": " + e.what());
  }
}

bool LabelSet::contains(std::string_view name) const noexcept {
  return std::ranges::find(labels, name) != labels.end();
}

void LabelSet::add(const std::string& name) {
  if (!contains(name)) labels.push_back(name);
}

std::string_view parse_mode_name(ParseMode mode) noexcept {
  switch (mode) {
    case ParseMode::AnswerLine: return "AnswerLine";
    case ParseMode::FullScan: return "FullScan";
    case ParseMode::Empty: return "Empty";
  }
  return "Empty";
}

std::string normalize_label_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::optional<std::string> match_label(std::string_view token, const ClassVocabulary& vocabulary,
                                       const AliasTable& aliases) {
  const std::string key = normalize_label_text(trim(token, kTokenJunk));
  if (key.empty()) return std::nullopt;
  for (const auto& c : vocabulary.classes()) {
    if (normalize_label_text(c.name) == key) return c.name;
  }
  for (const auto& [surface, canonical] : aliases) {
    if (normalize_label_text(surface) == key && vocabulary.contains(canonical)) return canonical;
  }
  return std::nullopt;
}

ParseOutcome parse_response(std::string_view text, const ClassVocabulary& vocabulary, const ParseOptions& options) {
  if (vocabulary.size() == 0) throw EmptyVocabulary("cannot parse against an empty vocabulary");
  ParseOutcome out;
  if (trim(text, " \t\r\n").empty()) return out;

  std::optional<std::string_view> answer;
  for (std::string_view line : split_lines(text)) {
    if (auto rest = answer_remainder(line)) answer = rest;
  }

  if (answer) {
    out.mode = ParseMode::AnswerLine;
    std::size_t pos = 0;
    while (pos <= answer->size()) {
      const auto semi = answer->find(';', pos);
      const auto end = semi == std::string_view::npos ? answer->size() : semi;
      const std::string_view raw = trim(answer->substr(pos, end - pos), " \t\r");
      if (!trim(raw, kTokenJunk).empty()) {
        if (auto name = match_label(raw, vocabulary, options.aliases)) {
          out.label_set.add(*name);
        } else {
          out.label_set.unmatched.emplace_back(raw);
        }
      }
      if (semi == std::string_view::npos) break;
      pos = semi + 1;
    }
    return out;
  }

  std::string_view region = text;
  if (options.cot) {
    if (auto at = find_last_ci(text, "conclude"); at != std::string_view::npos) region = text.substr(at);
  }
  out.mode = ParseMode::FullScan;
  out.label_set = full_scan(region, vocabulary, options.aliases);
  return out;
}

}  // namespace msprompt
