// msprompt: render pseudo-images, build prompts, run and ablate benchmarks.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "msprompt/bench.hpp"
#include "msprompt/errors.hpp"
#include "msprompt/image_io.hpp"
#include "msprompt/raster.hpp"
#include "msprompt/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace msprompt;

namespace {

std::vector<ModalityKind> parse_modality_list(const std::vector<std::string>& names) {
  if (names.empty() || (names.size() == 1 && names[0] == "all")) return {kAllModalities.begin(), kAllModalities.end()};
  std::vector<ModalityKind> out;
  for (const auto& n : names) out.push_back(parse_modality(n));
  return canonical_order(out);
}

NormalizationConfig normalization_from(const std::string& mode) {
  NormalizationConfig n;
  if (mode == "fixed") {
    n.mode = NormalizationConfig::Mode::FixedRange;
  } else if (mode != "scene_minmax") {
    throw ConfigError("normalization must be scene_minmax or fixed");
  }
  return n;
}

// "backend.kind=echo" sets doc["backend"]["kind"]; the value is read as JSON
// when it parses and as a plain string otherwise.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  std::string pointer;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) pointer += "/" + part;
  doc[json::json_pointer(pointer)] = value;
}

RunConfig with_overrides(const RunConfig& config, const std::vector<std::string>& sets) {
  if (sets.empty()) return config;
  json doc = to_json(config);
  for (const auto& s : sets) apply_override(doc, s);
  return run_config_from_json(doc, fs::path());
}

struct RunFlags {
  std::vector<std::string> sets;
  std::string output;
  std::string backend;
  std::string fixtures;
  std::string cache;
  int workers = 0;
  long long limit = -1;
  long long seed = -1;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--set", f.sets, "Override a config key, e.g. backend.kind=echo")->take_all();
  cmd->add_option("-o,--output", f.output, "Output directory");
  cmd->add_option("--backend", f.backend, "http | replay | record | echo | empty");
  cmd->add_option("--fixtures", f.fixtures, "Fixture directory for replay/record");
  cmd->add_option("--cache", f.cache, "Response cache directory");
  cmd->add_option("-j,--workers", f.workers, "Concurrent samples");
  cmd->add_option("--limit", f.limit, "Evaluate a seeded subset of this many samples");
  cmd->add_option("--seed", f.seed, "Subset seed");
}

RunConfig apply_flags(RunConfig c, const RunFlags& f) {
  c = with_overrides(c, f.sets);
  if (!f.output.empty()) c.output_dir = f.output;
  if (!f.backend.empty()) c.backend.kind = f.backend;
  if (!f.fixtures.empty()) c.backend.fixture_dir = f.fixtures;
  if (!f.cache.empty()) c.backend.cache_dir = f.cache;
  if (f.workers > 0) c.workers = f.workers;
  if (f.limit >= 0) c.sample_limit = static_cast<std::size_t>(f.limit);
  if (f.seed >= 0) c.seed = static_cast<std::uint64_t>(f.seed);
  return c;
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
    return;
  }
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-spectral pseudo-image prompting benchmark"};
  app.require_subcommand(1);

  // render
  auto* render = app.add_subcommand("render", "Render a scene's pseudo-images to PNG");
  std::string r_manifest, r_out = ".", r_norm = "scene_minmax";
  std::vector<std::string> r_modalities;
  int r_target = 10;
  render->add_option("manifest", r_manifest, "Scene manifest JSON")->required();
  render->add_option("-o,--out", r_out, "Output directory");
  render->add_option("-m,--modalities", r_modalities, "Modalities (slugs) or 'all'")->delimiter(',');
  render->add_option("--target-resolution", r_target, "Common grid resolution in meters");
  render->add_option("--normalization", r_norm, "scene_minmax | fixed");

  // prompt
  auto* prompt = app.add_subcommand("prompt", "Print the prompt for a scene or a modality set");
  std::string p_manifest, p_vocab, p_dataset, p_variant = "Baseline", p_templates, p_out, p_guides;
  std::vector<std::string> p_modalities;
  bool p_no_bands = false, p_no_desc = false;
  int p_target = 10;
  prompt->add_option("--manifest", p_manifest, "Scene manifest; without it images carry descriptors only");
  prompt->add_option("--vocab", p_vocab, "Vocabulary JSON");
  prompt->add_option("--dataset", p_dataset, "Preset vocabulary: bigearthnet | eurosat");
  prompt->add_option("-s,--strategy", p_variant, "Baseline | Expansion | CoT");
  prompt->add_option("-m,--modalities", p_modalities, "Modalities (slugs) or 'all'")->delimiter(',');
  prompt->add_flag("--no-band-catalog", p_no_bands, "Omit the band catalog");
  prompt->add_flag("--no-image-descriptions", p_no_desc, "Omit the per-image descriptions");
  prompt->add_option("--class-guides", p_guides, "on | off (default: on for Expansion)");
  prompt->add_option("--templates", p_templates, "Template directory");
  prompt->add_option("--target-resolution", p_target, "Common grid resolution in meters");
  prompt->add_option("-o,--out", p_out, "Write the prompt here instead of stdout");

  // run
  auto* run = app.add_subcommand("run", "Evaluate one configuration");
  std::string run_config;
  RunFlags run_flags;
  run->add_option("config", run_config, "Run config JSON")->required();
  add_run_flags(run, run_flags);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run an ablation matrix");
  std::string matrix_path;
  RunFlags ablate_flags;
  ablate->add_option("matrix", matrix_path, "Ablation matrix JSON")->required();
  add_run_flags(ablate, ablate_flags);

  // report
  auto* report = app.add_subcommand("report", "Rebuild report files from a run directory");
  std::string report_dir, report_format = "text";
  report->add_option("run_dir", report_dir, "Directory of a previous run")->required();
  report->add_option("-f,--format", report_format, "text | json | csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*render) {
      RenderConfig rc;
      rc.normalization = normalization_from(r_norm);
      const auto scene = align_to_common_grid(load_scene(r_manifest), r_target);
      for (const auto& img : render_modalities(scene, parse_modality_list(r_modalities), rc)) {
        const fs::path path = fs::path(r_out) / png_file_name(scene.scene_id(), img.kind);
        write_file(path, encode_png(img));
        std::cout << path.string() << "\n";
      }
    } else if (*prompt) {
      fs::path vocab_path = p_vocab;
      if (vocab_path.empty()) {
        if (p_dataset == "bigearthnet") {
          vocab_path = data_dir() / "vocab" / "bigearthnet19.json";
        } else if (p_dataset == "eurosat") {
          vocab_path = data_dir() / "vocab" / "eurosat.json";
        } else {
          throw ConfigError("prompt needs --vocab or --dataset bigearthnet|eurosat");
        }
      }
      const auto vocab = ClassVocabulary::load(vocab_path);
      PromptStrategy strategy;
      strategy.variant = parse_variant(p_variant);
      strategy.include_band_catalog = !p_no_bands;
      strategy.include_image_descriptors = !p_no_desc;
      if (p_guides == "on") strategy.include_class_guides = true;
      if (p_guides == "off") strategy.include_class_guides = false;
      const auto kinds = parse_modality_list(p_modalities);
      std::vector<PseudoImage> images;
      if (!p_manifest.empty()) {
        images = render_modalities(align_to_common_grid(load_scene(p_manifest), p_target), kinds, RenderConfig{});
      } else {
        for (auto k : kinds) {
          PseudoImage img;
          img.kind = k;
          img.descriptor = modality_descriptor(k);
          images.push_back(std::move(img));
        }
      }
      const TemplateSet templates = p_templates.empty() ? TemplateSet::builtin() : TemplateSet::load_directory(p_templates);
      write_or_print(p_out, build_prompt(std::move(images), vocab, strategy, templates).instruction_text);
    } else if (*run) {
      const RunConfig config = apply_flags(load_run_config(run_config), run_flags);
      const EvalReport rep = run_eval(config);
      if (!config.output_dir.empty()) emit_report(rep, config.output_dir);
      std::cout << text_summary(rep);
    } else if (*ablate) {
      AblationMatrix matrix = AblationMatrix::load(matrix_path);
      const auto limit = matrix.base.sample_limit;
      matrix.base = apply_flags(matrix.base, ablate_flags);
      if (ablate_flags.limit < 0) matrix.base.sample_limit = limit;
      const AblationResult result = run_ablation(matrix);
      if (!matrix.base.output_dir.empty()) emit_ablation(result, matrix.base.output_dir);
      std::cout << result.table;
      for (const auto& e : result.errors) {
        if (!e.empty()) return 1;
      }
    } else if (*report) {
      const EvalReport rep = reload_report(report_dir);
      emit_report(rep, report_dir);
      if (report_format == "json") {
        std::cout << to_json(rep).dump(2) << "\n";
      } else if (report_format == "csv") {
        std::cout << csv_header() << "\n" << csv_row(rep) << "\n";
      } else {
        std::cout << text_summary(rep);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
