#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "bench_internal.hpp"
#include "msprompt/bench.hpp"
#include "msprompt/errors.hpp"
#include "msprompt/image_io.hpp"

namespace msprompt {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string safe_name(std::string_view id) {
  std::string out;
  for (unsigned char c : id) out.push_back(std::isalnum(c) || c == '-' || c == '_' || c == '.' ? char(c) : '_');
  return out;
}

std::string sample_dir_name(const SampleResult& r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu_", r.position);
  return buf + safe_name(r.sample_id);
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw StorageError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DecodeError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

json score_json(const SampleScore& s) {
  return json{{"f1", s.f1}, {"precision", s.precision}, {"recall", s.recall}};
}

json sample_json(const SampleResult& r) {
  json j{{"sample_id", r.sample_id},
         {"position", r.position},
         {"prediction", r.prediction},
         {"truth", r.truth},
         {"parse_mode", parse_mode_name(r.parse_mode)},
         {"unmatched", r.unmatched},
         {"error", r.error ? json(*r.error) : json(nullptr)},
         {"from_cache", r.from_cache}};
  j["score"] = score_json(r.score);
  j["correct"] = r.correct;
  return j;
}

ParseMode parse_mode_from(const std::string& s) {
  if (s == "AnswerLine") return ParseMode::AnswerLine;
  if (s == "FullScan") return ParseMode::FullScan;
  return ParseMode::Empty;
}

SampleResult sample_from(const json& j) {
  SampleResult r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.position = j.value("position", std::size_t{0});
  r.prediction = j.at("prediction").get<std::vector<std::string>>();
  r.truth = j.at("truth").get<std::vector<std::string>>();
  r.parse_mode = parse_mode_from(j.value("parse_mode", "Empty"));
  r.unmatched = j.value("unmatched", std::vector<std::string>{});
  if (auto e = j.find("error"); e != j.end() && e->is_string()) r.error = e->get<std::string>();
  r.from_cache = j.value("from_cache", false);
  return r;
}

json run_metadata(const RunConfig& config, const EvalReport& report) {
  return json{{"config", to_json(config)},
              {"run_config_digest", report.run_config_digest},
              {"label", report.label},
              {"dataset", report.dataset},
              {"task", task_kind_name(report.task)},
              {"strategy", strategy_to_json(report.strategy)},
              {"modalities", modalities_json(report.modalities)},
              {"averaging", averaging_name(report.averaging)},
              {"backend", report.backend_identity}};
}

std::string default_label(const RunConfig& config) {
  if (!config.label.empty()) return config.label;
  return std::string(variant_name(config.strategy.variant)) + " / " + modality_set_label(config.modalities);
}

// Runs fn(i) for i in [0, n) on `workers` threads; the first exception stops
// the pool and is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  const auto width = static_cast<std::size_t>(std::max(1, workers));
  if (width == 1 || n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(width, n); ++t) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::string modality_set_label(const std::vector<ModalityKind>& kinds) {
  const auto k = canonical_order(kinds);
  using M = ModalityKind;
  if (k == std::vector{M::TrueColor}) return "RGB Only";
  if (k == std::vector{M::TrueColor, M::NDVI}) return "RGB + NDVI";
  if (k == std::vector{M::TrueColor, M::NDVI, M::NDWI}) return "RGB + NDVI + NDWI";
  if (k.size() == kAllModalities.size()) return "All Multi-Spectral";
  std::string out;
  for (auto m : k) out += (out.empty() ? "" : " + ") + std::string(modality_display_name(m));
  return out;
}

double EvalReport::headline() const {
  if (accuracy) return *accuracy;
  const auto& s = averaging == Averaging::Micro ? micro : sample_averaged;
  return s ? s->f1 : 0.0;
}

void finalize(EvalReport& report) {
  if (report.per_sample.empty()) throw EmptyRun("run has no samples");
  report.n_samples = report.per_sample.size();
  report.parse_modes = {{"AnswerLine", 0}, {"FullScan", 0}, {"Empty", 0}};
  report.unmatched_tokens = 0;
  report.backend_errors = 0;
  report.cache_hits = 0;

  std::vector<SampleScore> scores;
  std::vector<OverlapCounts> counts;
  std::vector<Top1Record> top1;
  for (auto& r : report.per_sample) {
    ++report.parse_modes[std::string(parse_mode_name(r.parse_mode))];
    report.unmatched_tokens += r.unmatched.size();
    if (r.error) ++report.backend_errors;
    if (r.from_cache) ++report.cache_hits;
    if (report.task == TaskKind::MultiLabel) {
      r.score = sample_prf(r.prediction, r.truth);
      scores.push_back(r.score);
      counts.push_back(overlap(r.prediction, r.truth));
    } else {
      std::optional<std::string> first;
      if (!r.prediction.empty()) first = r.prediction.front();
      r.correct = first && r.truth.size() == 1 && *first == r.truth.front();
      r.score = {};
      top1.push_back({first, r.truth.empty() ? std::string() : r.truth.front()});
    }
  }
  if (report.task == TaskKind::MultiLabel) {
    report.sample_averaged = aggregate_sample_averaged(scores);
    report.micro = aggregate_micro(counts);
    report.accuracy.reset();
  } else {
    report.accuracy = top1_accuracy(top1);
    report.sample_averaged.reset();
    report.micro.reset();
  }
}

json to_json(const EvalReport& r) {
  json aggregate = json::object();
  if (r.sample_averaged) aggregate["sample_averaged"] = score_json(*r.sample_averaged);
  if (r.micro) aggregate["micro"] = score_json(*r.micro);
  if (r.accuracy) aggregate["accuracy"] = *r.accuracy;
  aggregate["headline"] = r.headline();

  json samples = json::array();
  for (const auto& s : r.per_sample) samples.push_back(sample_json(s));

  return json{{"label", r.label},
              {"run_config_digest", r.run_config_digest},
              {"dataset", r.dataset},
              {"task", task_kind_name(r.task)},
              {"strategy", strategy_to_json(r.strategy)},
              {"modalities", modalities_json(r.modalities)},
              {"averaging", averaging_name(r.averaging)},
              {"backend", {{"identity", r.backend_identity}, {"cache_hits", r.cache_hits}, {"errors", r.backend_errors}}},
              {"n_samples", r.n_samples},
              {"aggregate", aggregate},
              {"counts", {{"parse_modes", r.parse_modes}, {"unmatched_tokens", r.unmatched_tokens}}},
              {"per_sample", samples}};
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  try {
    r.label = j.value("label", "");
    r.run_config_digest = j.at("run_config_digest").get<std::string>();
    r.dataset = j.value("dataset", "");
    r.task = parse_task_kind(j.at("task").get<std::string>());
    r.strategy = strategy_from_json(j.at("strategy"));
    r.modalities = parse_modalities_json(j.at("modalities"));
    r.averaging = j.value("averaging", "sample-averaged") == "micro" ? Averaging::Micro : Averaging::SampleAveraged;
    if (auto b = j.find("backend"); b != j.end()) {
      r.backend_identity = b->is_string() ? b->get<std::string>() : b->value("identity", "");
    }
    if (auto s = j.find("per_sample"); s != j.end()) {
      for (const auto& e : *s) r.per_sample.push_back(sample_from(e));
    }
  } catch (const json::exception& e) {
    throw DecodeError(std::string("malformed report: ") + e.what());
  }
  finalize(r);
  return r;
}

ModelRequest make_request(const PromptBundle& bundle, const BackendConfig& backend, std::string trace_id) {
  ModelRequest req;
  req.model_id = backend.model_id;
  req.instruction_text = bundle.instruction_text;
  req.generation = backend.generation;
  req.trace_id = std::move(trace_id);
  for (const auto& img : bundle.images) req.images.push_back(encode_png(img));
  return req;
}

EvalReport run_eval(const RunConfig& config, std::shared_ptr<Backend> backend) {
  const DatasetAdapter dataset = DatasetAdapter::open(config.dataset);
  if (!backend) backend = make_backend(config.backend, &dataset);
  const TemplateSet templates = config.template_dir ? TemplateSet::load_directory(*config.template_dir)
                                                    : TemplateSet::builtin();
  if (config.modalities.empty()) throw ConfigError("modalities must not be empty");

  const auto& all = dataset.samples();
  const std::vector<std::size_t> selected =
      config.sample_limit ? select_subset(all.size(), *config.sample_limit, config.seed)
                          : select_subset(all.size(), all.size(), config.seed);
  if (selected.empty()) throw EmptyRun("dataset '" + dataset.name() + "' has no samples");

  EvalReport report;
  report.label = default_label(config);
  report.run_config_digest = run_config_digest(config);
  report.dataset = dataset.name();
  report.task = dataset.task_kind();
  report.strategy = config.strategy;
  report.modalities = canonical_order(config.modalities);
  report.averaging = config.averaging;
  report.backend_identity = backend->identity();
  report.per_sample.resize(selected.size());

  const bool persist = !config.output_dir.empty();
  const fs::path samples_dir = config.output_dir / "samples";
  if (persist) {
    std::error_code ec;
    fs::remove_all(samples_dir, ec);
    fs::create_directories(samples_dir, ec);
    if (ec) throw StorageError("cannot create " + samples_dir.string() + ": " + ec.message());
  }

  ParseOptions parse_options;
  parse_options.cot = config.strategy.variant == PromptVariant::CoT;
  parse_options.aliases = dataset.aliases();

  parallel_for(selected.size(), config.workers, [&](std::size_t pos) {
    const Sample& sample = all[selected[pos]];
    MultiSpectralScene scene;
    try {
      scene = align_to_common_grid(load_scene(sample.manifest), config.target_resolution_m);
    } catch (const Error& e) {
      throw DatasetError("sample " + sample.sample_id + ": " + e.what());
    }
    const PromptBundle bundle = build_prompt(render_modalities(scene, report.modalities, config.render),
                                             dataset.vocabulary(), config.strategy, templates);
    const ModelRequest request = make_request(bundle, config.backend, sample.sample_id);

    SampleResult& result = report.per_sample[pos];
    result.sample_id = sample.sample_id;
    result.position = pos;
    result.truth = sample.truth;
    std::string text;
    try {
      ModelResponse response = backend->send(request);
      text = std::move(response.text);
      result.from_cache = response.from_cache;
    } catch (const Error& e) {
      result.error = e.what();
    }
    const ParseOutcome outcome = parse_response(text, dataset.vocabulary(), parse_options);
    result.prediction = outcome.label_set.labels;
    result.unmatched = outcome.label_set.unmatched;
    result.parse_mode = outcome.mode;

    if (persist) {
      const fs::path dir = samples_dir / sample_dir_name(result);
      write_text(dir / "prompt.txt", bundle.instruction_text);
      write_text(dir / "response.txt", text);
      write_text(dir / "outcome.json", sample_json(result).dump(2) + "\n");
    }
  });

  finalize(report);
  if (persist) write_text(config.output_dir / "run.json", run_metadata(config, report).dump(2) + "\n");
  return report;
}

EvalReport reload_report(const fs::path& run_dir) {
  const json meta = read_json(run_dir / "run.json");
  EvalReport r;
  try {
    r.label = meta.value("label", "");
    r.run_config_digest = meta.at("run_config_digest").get<std::string>();
    r.dataset = meta.value("dataset", "");
    r.task = parse_task_kind(meta.at("task").get<std::string>());
    r.strategy = strategy_from_json(meta.at("strategy"));
    r.modalities = parse_modalities_json(meta.at("modalities"));
    r.averaging = meta.value("averaging", "sample-averaged") == "micro" ? Averaging::Micro : Averaging::SampleAveraged;
    r.backend_identity = meta.value("backend", "");
  } catch (const json::exception& e) {
    throw DecodeError("malformed run metadata in " + run_dir.string() + ": " + e.what());
  }

  const fs::path samples_dir = run_dir / "samples";
  if (!fs::is_directory(samples_dir)) throw MissingFile("no per-sample artifacts in " + samples_dir.string());
  for (const auto& entry : fs::directory_iterator(samples_dir)) {
    const fs::path outcome = entry.path() / "outcome.json";
    if (!fs::exists(outcome)) continue;
    try {
      r.per_sample.push_back(sample_from(read_json(outcome)));
    } catch (const json::exception& e) {
      throw DecodeError("malformed " + outcome.string() + ": " + e.what());
    }
  }
  std::ranges::sort(r.per_sample, {}, &SampleResult::position);
  finalize(r);
  return r;
}

std::string csv_header() {
  return "label,dataset,task,strategy,modalities,averaging,n_samples,f1,precision,recall,micro_f1,micro_precision,"
         "micro_recall,accuracy,parse_answer_line,parse_full_scan,parse_empty,unmatched_tokens,backend_errors,"
         "cache_hits,backend,run_config_digest";
}

std::string csv_row(const EvalReport& r) {
  auto opt = [](const std::optional<SampleScore>& s, double SampleScore::*field) {
    return s ? fixed6((*s).*field) : std::string();
  };
  auto mode = [&](const char* name) {
    auto it = r.parse_modes.find(name);
    return std::to_string(it == r.parse_modes.end() ? 0 : it->second);
  };
  std::vector<std::string> cells = {csv_field(r.label),
                                    csv_field(r.dataset),
                                    std::string(task_kind_name(r.task)),
                                    std::string(variant_name(r.strategy.variant)),
                                    csv_field(modality_set_label(r.modalities)),
                                    std::string(averaging_name(r.averaging)),
                                    std::to_string(r.n_samples),
                                    opt(r.sample_averaged, &SampleScore::f1),
                                    opt(r.sample_averaged, &SampleScore::precision),
                                    opt(r.sample_averaged, &SampleScore::recall),
                                    opt(r.micro, &SampleScore::f1),
                                    opt(r.micro, &SampleScore::precision),
                                    opt(r.micro, &SampleScore::recall),
                                    r.accuracy ? fixed6(*r.accuracy) : std::string(),
                                    mode("AnswerLine"),
                                    mode("FullScan"),
                                    mode("Empty"),
                                    std::to_string(r.unmatched_tokens),
                                    std::to_string(r.backend_errors),
                                    std::to_string(r.cache_hits),
                                    csv_field(r.backend_identity),
                                    r.run_config_digest};
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
  return out;
}

std::string text_summary(const EvalReport& r) {
  auto onoff = [](bool b) { return b ? "on" : "off"; };
  std::ostringstream out;
  out << "Run:        " << r.label << "\n"
      << "Dataset:    " << r.dataset << " (" << task_kind_name(r.task) << "), " << r.n_samples << " samples\n"
      << "Strategy:   " << variant_name(r.strategy.variant) << " (band catalog " << onoff(r.strategy.include_band_catalog)
      << ", image descriptions " << onoff(r.strategy.include_image_descriptors) << ", class guides "
      << onoff(r.strategy.class_guides_enabled()) << ")\n"
      << "Modalities: " << modality_set_label(r.modalities) << "\n"
      << "Backend:    " << r.backend_identity << " (" << r.cache_hits << "/" << r.n_samples << " from cache, "
      << r.backend_errors << " errors)\n"
      << "Digest:     " << r.run_config_digest << "\n\n";
  if (r.accuracy) {
    out << "Accuracy (top-1)   " << fixed3(*r.accuracy) << "\n";
  }
  auto line = [&](const char* name, const std::optional<SampleScore>& s) {
    if (!s) return;
    out << name << "  F1 " << fixed3(s->f1) << "  Precision " << fixed3(s->precision) << "  Recall "
        << fixed3(s->recall) << "\n";
  };
  line("sample-averaged", r.sample_averaged);
  line("micro          ", r.micro);
  out << "\nParse modes: AnswerLine " << r.parse_modes.at("AnswerLine") << ", FullScan "
      << r.parse_modes.at("FullScan") << ", Empty " << r.parse_modes.at("Empty") << "; unmatched tokens "
      << r.unmatched_tokens << "\n";
  return out.str();
}

void emit_report(const EvalReport& report, const fs::path& dir) {
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  write_text(dir / "report.csv", csv_header() + "\n" + csv_row(report) + "\n");
  write_text(dir / "report.txt", text_summary(report));
}

}  // namespace msprompt
