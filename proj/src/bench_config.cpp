#include <algorithm>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "bench_internal.hpp"
#include "msprompt/bench.hpp"
#include "msprompt/digest.hpp"
#include "msprompt/errors.hpp"

namespace msprompt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_relative() ? (base / path).lexically_normal() : path;
}

std::string path_str(const fs::path& p) { return p.generic_string(); }

json range_json(const std::pair<double, double>& r) { return json::array({r.first, r.second}); }

std::pair<double, double> range_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("normalization range must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json strategy_json(const PromptStrategy& s) {
  json j{{"variant", variant_name(s.variant)},
         {"include_band_catalog", s.include_band_catalog},
         {"include_image_descriptors", s.include_image_descriptors}};
  j["include_class_guides"] = s.include_class_guides ? json(*s.include_class_guides) : json(nullptr);
  return j;
}

PromptStrategy strategy_from(const json& j) {
  PromptStrategy s;
  if (j.is_string()) {
    s.variant = parse_variant(j.get<std::string>());
    return s;
  }
  s.variant = parse_variant(j.value("variant", "Baseline"));
  s.include_band_catalog = j.value("include_band_catalog", true);
  s.include_image_descriptors = j.value("include_image_descriptors", true);
  if (auto g = j.find("include_class_guides"); g != j.end() && !g->is_null()) s.include_class_guides = g->get<bool>();
  return s;
}

std::vector<ModalityKind> modalities_from(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "all") return {kAllModalities.begin(), kAllModalities.end()};
    return {parse_modality(j.get<std::string>())};
  }
  std::vector<ModalityKind> out;
  for (const auto& m : j) out.push_back(parse_modality(m.get<std::string>()));
  out = canonical_order(out);
  if (out.empty()) throw ConfigError("modalities must not be empty");
  return out;
}

// Unbiased draw in [0, bound) from a 64-bit engine, independent of the
// standard library's distribution implementation.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

json modalities_json(const std::vector<ModalityKind>& kinds) {
  json j = json::array();
  for (auto k : kinds) j.push_back(modality_slug(k));
  return j;
}

std::vector<ModalityKind> parse_modalities_json(const json& j) { return modalities_from(j); }

json strategy_to_json(const PromptStrategy& s) { return strategy_json(s); }
PromptStrategy strategy_from_json(const json& j) { return strategy_from(j); }

RunConfig run_config_from_json(const json& doc, const fs::path& base_dir) {
  RunConfig c;
  try {
    c.label = doc.value("label", "");

    const json& ds = doc.at("dataset");
    c.dataset.name = ds.value("name", "");
    c.dataset.index = resolve(base_dir, ds.value("index", ""));
    c.dataset.vocabulary = resolve(base_dir, ds.value("vocabulary", ""));
    if (auto m = ds.find("label_map"); m != ds.end() && !m->is_null()) {
      c.dataset.label_map = resolve(base_dir, m->get<std::string>());
    }
    if (auto a = ds.find("aliases"); a != ds.end() && !a->is_null()) {
      c.dataset.aliases = resolve(base_dir, a->get<std::string>());
    }

    if (auto s = doc.find("strategy"); s != doc.end()) c.strategy = strategy_from(*s);
    if (auto m = doc.find("modalities"); m != doc.end()) c.modalities = modalities_from(*m);

    if (auto n = doc.find("normalization"); n != doc.end()) {
      const std::string mode = n->value("mode", "scene_minmax");
      if (mode == "scene_minmax") {
        c.render.normalization.mode = NormalizationConfig::Mode::SceneMinMax;
      } else if (mode == "fixed") {
        c.render.normalization.mode = NormalizationConfig::Mode::FixedRange;
      } else {
        throw ConfigError("normalization.mode must be scene_minmax or fixed, got " + mode);
      }
      if (auto d = n->find("default_range"); d != n->end()) c.render.normalization.default_range = range_from(*d);
      if (auto r = n->find("ranges"); r != n->end()) {
        for (const auto& [band, range] : r->items()) {
          c.render.normalization.ranges[parse_band_code(band)] = range_from(range);
        }
      }
    }
    c.target_resolution_m = doc.value("target_resolution_m", 10);
    if (auto t = doc.find("templates"); t != doc.end() && !t->is_null()) {
      c.template_dir = resolve(base_dir, t->get<std::string>());
    }
    const std::string averaging = doc.value("averaging", "sample-averaged");
    if (averaging == "sample-averaged") {
      c.averaging = Averaging::SampleAveraged;
    } else if (averaging == "micro") {
      c.averaging = Averaging::Micro;
    } else {
      throw ConfigError("averaging must be sample-averaged or micro, got " + averaging);
    }

    if (auto b = doc.find("backend"); b != doc.end()) {
      auto& bc = c.backend;
      bc.kind = b->value("kind", bc.kind);
      bc.record_inner = b->value("record_inner", bc.record_inner);
      bc.model_id = b->value("model_id", bc.model_id);
      bc.generation.temperature = b->value("temperature", bc.generation.temperature);
      bc.generation.max_output_tokens = b->value("max_output_tokens", bc.generation.max_output_tokens);
      bc.http.endpoint = b->value("endpoint", bc.http.endpoint);
      bc.http.api_key_env = b->value("api_key_env", bc.http.api_key_env);
      bc.http.auth_header = b->value("auth_header", bc.http.auth_header);
      bc.http.requests_per_minute = b->value("requests_per_minute", bc.http.requests_per_minute);
      bc.http.max_in_flight = b->value("max_in_flight", bc.http.max_in_flight);
      bc.http.max_attempts = b->value("max_attempts", bc.http.max_attempts);
      if (auto t = b->find("timeout_s"); t != b->end()) {
        bc.http.timeout = std::chrono::milliseconds(static_cast<long long>(t->get<double>() * 1000.0));
      }
      if (auto t = b->find("initial_backoff_ms"); t != b->end()) {
        bc.http.initial_backoff = std::chrono::milliseconds(t->get<long long>());
      }
      if (auto t = b->find("max_backoff_ms"); t != b->end()) {
        bc.http.max_backoff = std::chrono::milliseconds(t->get<long long>());
      }
      bc.fixture_dir = resolve(base_dir, b->value("fixture_dir", ""));
      bc.cache_dir = resolve(base_dir, b->value("cache_dir", ""));
    }

    if (auto l = doc.find("sample_limit"); l != doc.end() && !l->is_null()) c.sample_limit = l->get<std::size_t>();
    c.seed = doc.value("seed", std::uint64_t{0});
    c.workers = std::max(1, doc.value("workers", 1));
    c.output_dir = resolve(base_dir, doc.value("output_dir", ""));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("run config not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed run config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(doc, path.parent_path());
}

json to_json(const RunConfig& c) {
  json ds{{"name", c.dataset.name},
          {"index", path_str(c.dataset.index)},
          {"vocabulary", path_str(c.dataset.vocabulary)},
          {"label_map", c.dataset.label_map ? json(path_str(*c.dataset.label_map)) : json(nullptr)},
          {"aliases", c.dataset.aliases ? json(path_str(*c.dataset.aliases)) : json(nullptr)}};

  json ranges = json::object();
  for (const auto& [band, r] : c.render.normalization.ranges) ranges[std::string(band_code(band))] = range_json(r);
  json norm{{"mode", c.render.normalization.mode == NormalizationConfig::Mode::FixedRange ? "fixed" : "scene_minmax"},
            {"default_range", range_json(c.render.normalization.default_range)},
            {"ranges", ranges}};

  const auto& b = c.backend;
  json backend{{"kind", b.kind},
               {"record_inner", b.record_inner},
               {"model_id", b.model_id},
               {"temperature", b.generation.temperature},
               {"max_output_tokens", b.generation.max_output_tokens},
               {"endpoint", b.http.endpoint},
               {"api_key_env", b.http.api_key_env},
               {"auth_header", b.http.auth_header},
               {"requests_per_minute", b.http.requests_per_minute},
               {"max_in_flight", b.http.max_in_flight},
               {"max_attempts", b.http.max_attempts},
               {"timeout_s", static_cast<double>(b.http.timeout.count()) / 1000.0},
               {"initial_backoff_ms", b.http.initial_backoff.count()},
               {"max_backoff_ms", b.http.max_backoff.count()},
               {"fixture_dir", path_str(b.fixture_dir)},
               {"cache_dir", path_str(b.cache_dir)}};

  return json{{"label", c.label},
              {"dataset", ds},
              {"strategy", strategy_json(c.strategy)},
              {"modalities", modalities_json(c.modalities)},
              {"normalization", norm},
              {"target_resolution_m", c.target_resolution_m},
              {"templates", c.template_dir ? json(path_str(*c.template_dir)) : json(nullptr)},
              {"averaging", averaging_name(c.averaging)},
              {"backend", backend},
              {"sample_limit", c.sample_limit ? json(*c.sample_limit) : json(nullptr)},
              {"seed", c.seed},
              {"workers", c.workers},
              {"output_dir", path_str(c.output_dir)}};
}

std::string run_config_digest(const RunConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");
  j.erase("workers");
  j.erase("label");
  return sha256_hex(j.dump());
}

std::vector<std::size_t> select_subset(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (count >= n) return idx;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(draw_below(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::ranges::sort(idx);
  return idx;
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config, const DatasetAdapter* dataset) {
  auto leaf = [&](const std::string& kind) -> std::shared_ptr<Backend> {
    if (kind == "http") return std::make_shared<HttpBackend>(config.http);
    if (kind == "empty") {
      return std::make_shared<ScriptedBackend>([](const ModelRequest&) { return std::string(); }, "mock:empty");
    }
    if (kind == "echo") {
      if (!dataset) throw ConfigError("the echo backend needs the dataset's ground truth");
      std::map<std::string, std::string> answers;
      for (const auto& s : dataset->samples()) {
        std::string line = "ANSWER: ";
        for (std::size_t i = 0; i < s.truth.size(); ++i) line += (i ? "; " : "") + s.truth[i];
        answers[s.sample_id] = line;
      }
      return std::make_shared<ScriptedBackend>(
          [answers = std::move(answers)](const ModelRequest& r) {
            auto it = answers.find(r.trace_id);
            return it == answers.end() ? std::string() : it->second;
          },
          "mock:echo");
    }
    throw ConfigError("unknown backend kind: " + kind);
  };

  std::shared_ptr<Backend> backend;
  if (config.kind == "replay") {
    if (config.fixture_dir.empty()) throw ConfigError("the replay backend needs fixture_dir");
    return std::make_shared<ReplayBackend>(config.fixture_dir);
  }
  if (config.kind == "record") {
    if (config.fixture_dir.empty()) throw ConfigError("the record backend needs fixture_dir");
    backend = std::make_shared<RecordingBackend>(leaf(config.record_inner), config.fixture_dir);
  } else {
    backend = leaf(config.kind);
  }
  if (!config.cache_dir.empty()) backend = std::make_shared<CachingBackend>(backend, config.cache_dir);
  return backend;
}

}  // namespace msprompt
