#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "msprompt/backend.hpp"
#include "msprompt/http_backend.hpp"
#include "msprompt/metrics.hpp"
#include "msprompt/parse.hpp"
#include "msprompt/promptkit.hpp"
#include "msprompt/spectral.hpp"

namespace msprompt {

// Shipped vocabularies, mappings and templates. MSPROMPT_DATA_DIR overrides
// the compiled-in location.
std::filesystem::path data_dir();

// Source label -> target class, or nullopt for labels the target scheme drops.
using LabelMapping = std::map<std::string, std::optional<std::string>>;
// JSON object {"Pastures": "Pastures", "Airports": null, ...}.
LabelMapping load_label_mapping(const std::filesystem::path& path);
// Every target is a vocabulary class and every class is some label's target.
// Throws ConfigError naming the first violation.
void check_mapping(const LabelMapping& mapping, const ClassVocabulary& vocabulary);

struct DatasetSpec {
  // "bigearthnet" and "eurosat" fill unset paths from data_dir().
  std::string name;
  std::filesystem::path index;
  std::filesystem::path vocabulary;
  std::optional<std::filesystem::path> label_map;
  std::optional<std::filesystem::path> aliases;
};

struct Sample {
  std::string sample_id;
  std::filesystem::path manifest;
  std::vector<std::string> truth;
};

// Index file: CSV with header `sample_id,manifest,labels`; labels are
// ';'-separated and manifest paths resolve against the index directory.
class DatasetAdapter {
 public:
  // Throws DatasetError / MissingFile / InvalidVocabulary.
  static DatasetAdapter open(const DatasetSpec& spec);

  const std::string& name() const noexcept { return name_; }
  TaskKind task_kind() const noexcept { return vocabulary_.task(); }
  const ClassVocabulary& vocabulary() const noexcept { return vocabulary_; }
  const AliasTable& aliases() const noexcept { return aliases_; }
  const std::vector<Sample>& samples() const noexcept { return samples_; }
  // Samples whose labels all mapped to nothing.
  std::size_t dropped_samples() const noexcept { return dropped_; }

 private:
  std::string name_;
  ClassVocabulary vocabulary_;
  AliasTable aliases_;
  std::vector<Sample> samples_;
  std::size_t dropped_ = 0;
};

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_field(std::string_view value);

struct BackendConfig {
  // http | replay | record | echo | empty
  std::string kind = "replay";
  // Backend wrapped by "record": http or echo.
  std::string record_inner = "http";
  std::string model_id = "gemini-2.5-flash";
  GenerationParams generation;
  HttpBackendConfig http;
  std::filesystem::path fixture_dir;
  // Empty disables the response cache.
  std::filesystem::path cache_dir;
};

struct RunConfig {
  std::string label;
  DatasetSpec dataset;
  PromptStrategy strategy;
  std::vector<ModalityKind> modalities{kAllModalities.begin(), kAllModalities.end()};
  RenderConfig render;
  int target_resolution_m = 10;
  std::optional<std::filesystem::path> template_dir;
  Averaging averaging = Averaging::SampleAveraged;
  BackendConfig backend;
  std::optional<std::size_t> sample_limit;
  std::uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path output_dir;
};

// Relative paths resolve against base_dir. Throws ConfigError.
RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);
// SHA-256 of the result-relevant configuration (everything except
// output_dir and workers).
std::string run_config_digest(const RunConfig& config);

// Deterministic subset of `count` indices out of [0, n), ascending.
std::vector<std::size_t> select_subset(std::size_t n, std::size_t count, std::uint64_t seed);

struct SampleResult {
  std::string sample_id;
  std::size_t position = 0;
  std::vector<std::string> prediction;
  std::vector<std::string> truth;
  ParseMode parse_mode = ParseMode::Empty;
  std::vector<std::string> unmatched;
  std::optional<std::string> error;
  bool from_cache = false;
  // Filled by finalize().
  SampleScore score;
  bool correct = false;
};

struct EvalReport {
  std::string label;
  std::string run_config_digest;
  std::string dataset;
  TaskKind task = TaskKind::MultiLabel;
  PromptStrategy strategy;
  std::vector<ModalityKind> modalities;
  Averaging averaging = Averaging::SampleAveraged;
  std::string backend_identity;
  std::size_t n_samples = 0;
  // Multi-label runs.
  std::optional<SampleScore> sample_averaged;
  std::optional<SampleScore> micro;
  // Multi-class runs.
  std::optional<double> accuracy;
  std::map<std::string, std::size_t> parse_modes;
  std::size_t unmatched_tokens = 0;
  std::size_t backend_errors = 0;
  std::size_t cache_hits = 0;
  std::vector<SampleResult> per_sample;

  // The aggregate selected by `averaging`, or accuracy for multi-class.
  double headline() const;
};

// Scores per_sample and fills every aggregate and tally. Throws EmptyRun.
void finalize(EvalReport& report);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& doc);

// Builds the backend stack named by the config. `dataset` feeds the echo mock.
std::shared_ptr<Backend> make_backend(const BackendConfig& config, const DatasetAdapter* dataset = nullptr);

ModelRequest make_request(const PromptBundle& bundle, const BackendConfig& backend, std::string trace_id);

// Loads, aligns, renders, prompts, sends, parses and scores every selected
// sample. Per-sample artifacts go under output_dir/samples when output_dir is
// set. Backend failures are recorded per sample; dataset failures abort.
EvalReport run_eval(const RunConfig& config, std::shared_ptr<Backend> backend = nullptr);

// report.json, report.csv, report.txt in `dir`. Throws StorageError.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);
std::string csv_header();
std::string csv_row(const EvalReport& report);
std::string text_summary(const EvalReport& report);

// Rebuilds a report from output_dir/run.json and output_dir/samples.
EvalReport reload_report(const std::filesystem::path& run_dir);

struct AblationRow {
  std::string method;
  std::string modality_label;
  PromptStrategy strategy;
  std::vector<ModalityKind> modalities;
};

struct AblationMatrix {
  RunConfig base;
  std::vector<AblationRow> rows;

  // The 11-row Baseline/Expansion/CoT grid.
  static std::vector<AblationRow> default_rows();
  // {"base": {...run config...} | "base_config": path, "rows": "default" | [...],
  //  "subset_size": n}. Without subset_size or base.sample_limit, 1000 samples.
  static AblationMatrix load(const std::filesystem::path& path);
};

inline constexpr std::size_t kDefaultAblationSubset = 1000;

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<std::optional<EvalReport>> reports;
  std::vector<std::string> errors;  // empty string for rows that succeeded
  std::string table;
};

// Rows run sequentially over one shared backend; a failing row is recorded
// and the rest continue.
AblationResult run_ablation(const AblationMatrix& matrix, std::shared_ptr<Backend> backend = nullptr);
std::string ablation_table(const AblationResult& result);
// ablation.json, ablation.csv, ablation.txt plus each row's own report files.
void emit_ablation(const AblationResult& result, const std::filesystem::path& dir);

std::string modality_set_label(const std::vector<ModalityKind>& kinds);

}  // namespace msprompt
