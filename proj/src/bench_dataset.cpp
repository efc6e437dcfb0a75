#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "msprompt/bench.hpp"
#include "msprompt/errors.hpp"

#ifndef MSPROMPT_DEFAULT_DATA_DIR
#define MSPROMPT_DEFAULT_DATA_DIR "data"
#endif

namespace msprompt {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path data_dir() {
  if (const char* env = std::getenv("MSPROMPT_DATA_DIR"); env && *env) return env;
  return MSPROMPT_DEFAULT_DATA_DIR;
}

LabelMapping load_label_mapping(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("label mapping not found: " + path.string());
  LabelMapping mapping;
  try {
    const json doc = json::parse(in);
    for (const auto& [source, target] : doc.items()) {
      mapping[source] = target.is_null() ? std::nullopt : std::optional(target.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw DecodeError("malformed label mapping " + path.string() + ": " + e.what());
  }
  return mapping;
}

void check_mapping(const LabelMapping& mapping, const ClassVocabulary& vocabulary) {
  std::set<std::string> reached;
  for (const auto& [source, target] : mapping) {
    if (!target) continue;
    if (!vocabulary.contains(*target)) {
      throw ConfigError("label '" + source + "' maps to '" + *target + "', which is not a vocabulary class");
    }
    reached.insert(*target);
  }
  for (const auto& c : vocabulary.classes()) {
    if (!reached.contains(c.name)) throw ConfigError("class '" + c.name + "' is not reachable from the mapping");
  }
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        field.clear();
        row.clear();
        field_started = false;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

namespace {

void apply_preset(DatasetSpec& spec) {
  const fs::path root = data_dir();
  if (spec.name == "bigearthnet" || spec.name == "bigearthnet-19") {
    if (spec.vocabulary.empty()) spec.vocabulary = root / "vocab" / "bigearthnet19.json";
    if (!spec.label_map) spec.label_map = root / "mappings" / "bigearthnet43_to_19.json";
  } else if (spec.name == "eurosat") {
    if (spec.vocabulary.empty()) spec.vocabulary = root / "vocab" / "eurosat.json";
    if (!spec.aliases) spec.aliases = root / "aliases" / "eurosat.json";
  }
}

std::vector<std::string> split_labels(std::string_view field) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= field.size()) {
    const auto semi = field.find(';', pos);
    const auto end = semi == std::string_view::npos ? field.size() : semi;
    std::string_view tok = field.substr(pos, end - pos);
    const auto a = tok.find_first_not_of(" \t");
    if (a != std::string_view::npos) {
      const auto b = tok.find_last_not_of(" \t");
      out.emplace_back(tok.substr(a, b - a + 1));
    }
    if (semi == std::string_view::npos) break;
    pos = semi + 1;
  }
  return out;
}

}  // namespace

DatasetAdapter DatasetAdapter::open(const DatasetSpec& input) {
  DatasetSpec spec = input;
  apply_preset(spec);
  if (spec.index.empty()) throw DatasetError("dataset '" + spec.name + "' has no index file");
  if (spec.vocabulary.empty()) throw DatasetError("dataset '" + spec.name + "' has no vocabulary file");

  DatasetAdapter ds;
  ds.name_ = spec.name.empty() ? spec.index.stem().string() : spec.name;
  ds.vocabulary_ = ClassVocabulary::load(spec.vocabulary);
  if (spec.aliases) ds.aliases_ = load_alias_table(*spec.aliases);
  std::optional<LabelMapping> mapping;
  if (spec.label_map) {
    mapping = load_label_mapping(*spec.label_map);
    check_mapping(*mapping, ds.vocabulary_);
  }

  std::ifstream in(spec.index, std::ios::binary);
  if (!in) throw DatasetError("cannot read dataset index " + spec.index.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto rows = parse_csv(ss.str());
  if (rows.empty()) throw DatasetError("dataset index is empty: " + spec.index.string());

  const auto& header = rows.front();
  auto column = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DatasetError("dataset index " + spec.index.string() + " lacks column '" + std::string(name) + "'");
  };
  const std::size_t c_id = column("sample_id");
  const std::size_t c_manifest = column("manifest");
  const std::size_t c_labels = column("labels");
  const fs::path base = spec.index.parent_path();

  std::set<std::string> ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < header.size()) {
      throw DatasetError(spec.index.string() + ": row " + std::to_string(r + 1) + " has too few fields");
    }
    Sample s;
    s.sample_id = row[c_id];
    if (s.sample_id.empty()) throw DatasetError(spec.index.string() + ": row " + std::to_string(r + 1) + " has no id");
    if (!ids.insert(s.sample_id).second) throw DatasetError("duplicate sample id: " + s.sample_id);
    s.manifest = row[c_manifest];
    if (s.manifest.is_relative()) s.manifest = base / s.manifest;

    for (const auto& raw : split_labels(row[c_labels])) {
      std::optional<std::string> resolved;
      if (mapping) {
        auto it = mapping->find(raw);
        if (it == mapping->end()) throw DatasetError("sample " + s.sample_id + ": label not in mapping: " + raw);
        resolved = it->second;
        if (!resolved) continue;
      } else {
        resolved = match_label(raw, ds.vocabulary_, ds.aliases_);
        if (!resolved) throw DatasetError("sample " + s.sample_id + ": label not in vocabulary: " + raw);
      }
      if (std::ranges::find(s.truth, *resolved) == s.truth.end()) s.truth.push_back(*resolved);
    }
    if (s.truth.empty()) {
      if (mapping) {
        ++ds.dropped_;
        continue;
      }
      throw DatasetError("sample " + s.sample_id + " has no ground-truth labels");
    }
    if (ds.vocabulary_.task() == TaskKind::MultiClass && s.truth.size() != 1) {
      throw DatasetError("sample " + s.sample_id + " of a multi-class dataset has " +
                         std::to_string(s.truth.size()) + " labels");
    }
    ds.samples_.push_back(std::move(s));
  }
  return ds;
}

}  // namespace msprompt
