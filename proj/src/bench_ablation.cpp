#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bench_internal.hpp"
#include "msprompt/bench.hpp"
#include "msprompt/errors.hpp"

namespace msprompt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using M = ModalityKind;

AblationRow make_row(std::string method, PromptStrategy strategy, std::vector<ModalityKind> kinds) {
  AblationRow row;
  row.method = std::move(method);
  row.modalities = canonical_order(kinds);
  row.modality_label = modality_set_label(row.modalities);
  row.strategy = strategy;
  return row;
}

std::string slug(std::string_view text) {
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (!out.empty() && out.back() != '-') {
      out.push_back('-');
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

std::string row_dir_name(std::size_t i, const AblationRow& row) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02zu_", i + 1);
  return buf + slug(row.method + " " + row.modality_label);
}

json read_doc(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw StorageError("failed writing " + path.string());
}

}  // namespace

std::vector<AblationRow> AblationMatrix::default_rows() {
  const std::vector<std::vector<ModalityKind>> ladder = {
      {M::TrueColor},
      {M::TrueColor, M::NDVI},
      {M::TrueColor, M::NDVI, M::NDWI},
      {kAllModalities.begin(), kAllModalities.end()},
  };
  const std::vector<ModalityKind> all = ladder.back();
  PromptStrategy baseline, expansion, cot;
  expansion.variant = PromptVariant::Expansion;
  cot.variant = PromptVariant::CoT;

  std::vector<AblationRow> rows;
  for (const auto& kinds : ladder) rows.push_back(make_row("Baseline", baseline, kinds));
  rows.push_back(make_row("Expansion", expansion, all));
  for (const auto& kinds : ladder) rows.push_back(make_row("CoT", cot, kinds));

  PromptStrategy no_bands = cot;
  no_bands.include_band_catalog = false;
  rows.push_back(make_row("CoT w/o band description", no_bands, all));
  PromptStrategy no_descriptors = cot;
  no_descriptors.include_image_descriptors = false;
  rows.push_back(make_row("CoT w/o pseudo-image description", no_descriptors, all));
  return rows;
}

AblationMatrix AblationMatrix::load(const fs::path& path) {
  const json doc = read_doc(path);
  const fs::path base_dir = path.parent_path();
  AblationMatrix m;
  try {
    if (auto b = doc.find("base"); b != doc.end()) {
      m.base = run_config_from_json(*b, base_dir);
    } else if (auto p = doc.find("base_config"); p != doc.end()) {
      fs::path cfg = p->get<std::string>();
      m.base = load_run_config(cfg.is_relative() ? base_dir / cfg : cfg);
    } else {
      throw ConfigError("ablation matrix needs \"base\" or \"base_config\"");
    }

    const auto rows = doc.find("rows");
    if (rows == doc.end() || (rows->is_string() && rows->get<std::string>() == "default")) {
      m.rows = default_rows();
    } else if (rows->is_array()) {
      for (const auto& r : *rows) {
        const std::string method = r.value("method", "");
        PromptStrategy strategy = strategy_from_json(r.contains("strategy") ? r.at("strategy") : json(method));
        m.rows.push_back(make_row(method.empty() ? std::string(variant_name(strategy.variant)) : method, strategy,
                                  parse_modalities_json(r.at("modalities"))));
      }
    } else {
      throw ConfigError("ablation rows must be \"default\" or a list");
    }
    if (m.rows.empty()) throw ConfigError("ablation matrix has no rows");

    if (auto s = doc.find("subset_size"); s != doc.end()) {
      m.base.sample_limit = s->get<std::size_t>();
    } else if (!m.base.sample_limit) {
      m.base.sample_limit = kDefaultAblationSubset;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid ablation matrix: ") + e.what());
  }
  return m;
}

AblationResult run_ablation(const AblationMatrix& matrix, std::shared_ptr<Backend> backend) {
  RunConfig base = matrix.base;
  if (base.backend.cache_dir.empty() && base.backend.kind != "replay" && !base.output_dir.empty()) {
    base.backend.cache_dir = base.output_dir / "cache";
  }
  if (!backend) {
    // Only the echo mock needs the dataset; opening it for other kinds would
    // just duplicate the first row's validation work.
    std::optional<DatasetAdapter> dataset;
    if (base.backend.kind == "echo" || base.backend.record_inner == "echo") dataset = DatasetAdapter::open(base.dataset);
    backend = make_backend(base.backend, dataset ? &*dataset : nullptr);
  }

  AblationResult result;
  result.rows = matrix.rows;
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    const AblationRow& row = matrix.rows[i];
    RunConfig config = base;
    config.label = row.method + " / " + row.modality_label;
    config.strategy = row.strategy;
    config.modalities = row.modalities;
    if (!base.output_dir.empty()) config.output_dir = base.output_dir / "rows" / row_dir_name(i, row);
    try {
      EvalReport report = run_eval(config, backend);
      if (!config.output_dir.empty()) emit_report(report, config.output_dir);
      result.reports.emplace_back(std::move(report));
      result.errors.emplace_back();
    } catch (const Error& e) {
      result.reports.emplace_back(std::nullopt);
      result.errors.emplace_back(e.what());
    }
  }
  result.table = ablation_table(result);
  return result;
}

std::string ablation_table(const AblationResult& result) {
  bool multiclass = false;
  for (const auto& r : result.reports) {
    if (r && r->task == TaskKind::MultiClass) multiclass = true;
  }
  std::size_t wm = 6, wl = 10;
  for (const auto& row : result.rows) {
    wm = std::max(wm, row.method.size());
    wl = std::max(wl, row.modality_label.size());
  }
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };

  std::ostringstream out;
  out << pad("Method", wm) << "  " << pad("Modalities", wl);
  out << (multiclass ? "  Accuracy" : "  F1     Precision  Recall") << "\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& row = result.rows[i];
    out << pad(row.method, wm) << "  " << pad(row.modality_label, wl);
    const auto& rep = result.reports[i];
    if (!rep) {
      out << "  failed: " << result.errors[i];
    } else if (rep->accuracy) {
      out << "  " << fixed3(*rep->accuracy);
    } else {
      const auto& s = rep->averaging == Averaging::Micro ? rep->micro : rep->sample_averaged;
      out << "  " << pad(fixed3(s->f1), 5) << "  " << pad(fixed3(s->precision), 9) << "  " << fixed3(s->recall);
    }
    out << "\n";
  }
  return out.str();
}

void emit_ablation(const AblationResult& result, const fs::path& dir) {
  json rows = json::array();
  std::string csv = "method,modality_label," + csv_header() + ",error\n";
  const std::size_t columns = static_cast<std::size_t>(std::ranges::count(csv_header(), ',')) + 1;
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& row = result.rows[i];
    const auto& rep = result.reports[i];
    json j{{"method", row.method},
           {"modality_label", row.modality_label},
           {"strategy", strategy_to_json(row.strategy)},
           {"modalities", modalities_json(row.modalities)}};
    j["report"] = rep ? to_json(*rep) : json(nullptr);
    j["error"] = result.errors[i].empty() ? json(nullptr) : json(result.errors[i]);
    rows.push_back(std::move(j));

    csv += csv_field(row.method) + "," + csv_field(row.modality_label) + ",";
    csv += rep ? csv_row(*rep) : std::string(columns - 1, ',');
    csv += "," + csv_field(result.errors[i]) + "\n";
  }
  write_text(dir / "ablation.json", json{{"rows", rows}}.dump(2) + "\n");
  write_text(dir / "ablation.csv", csv);
  write_text(dir / "ablation.txt", result.table);
}

}  // namespace msprompt
