#include "msprompt/backend.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "msprompt/digest.hpp"

namespace msprompt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json to_json(const FixtureRecord& r) {
  return json{{"key", r.key},
              {"model_id", r.model_id},
              {"generation", {{"temperature", r.generation.temperature},
                              {"max_output_tokens", r.generation.max_output_tokens}}},
              {"instruction_sha256", r.instruction_sha256},
              {"instruction_chars", r.instruction_chars},
              {"image_count", r.image_count},
              {"image_bytes", r.image_bytes},
              {"trace_id", r.trace_id},
              {"response_text", r.response_text}};
}

FixtureRecord from_json(const json& j) {
  FixtureRecord r;
  r.key = j.at("key").get<std::string>();
  r.model_id = j.value("model_id", "");
  if (auto g = j.find("generation"); g != j.end()) {
    r.generation.temperature = g->value("temperature", 0.0);
    r.generation.max_output_tokens = g->value("max_output_tokens", 0);
  }
  r.instruction_sha256 = j.value("instruction_sha256", "");
  r.instruction_chars = j.value("instruction_chars", std::size_t{0});
  r.image_count = j.value("image_count", std::size_t{0});
  r.image_bytes = j.value("image_bytes", std::size_t{0});
  r.trace_id = j.value("trace_id", "");
  r.response_text = j.at("response_text").get<std::string>();
  return r;
}

std::atomic<std::uint64_t> g_tmp_counter{0};

}  // namespace

CacheKey CacheKey::of(const ModelRequest& request) {
  Sha256 h;
  h.update_framed(std::string_view("msprompt-request-v1"));
  h.update_framed(request.model_id);
  h.update_framed(format_real(request.generation.temperature));
  h.update_framed(std::to_string(request.generation.max_output_tokens));
  h.update_framed(request.instruction_text);
  h.update_framed(std::to_string(request.images.size()));
  for (const auto& img : request.images) h.update_framed(img);
  return {h.finish_hex()};
}

ModelResponse Backend::send(const ModelRequest& request) {
  requests_.fetch_add(1, std::memory_order_relaxed);
  ModelResponse r = do_send(request);
  if (r.from_cache) cache_hits_.fetch_add(1, std::memory_order_relaxed);
  return r;
}

FixtureRecord summarize(const ModelRequest& request, const CacheKey& key, const std::string& response_text) {
  FixtureRecord r;
  r.key = key.digest;
  r.model_id = request.model_id;
  r.generation = request.generation;
  r.instruction_sha256 = sha256_hex(request.instruction_text);
  r.instruction_chars = request.instruction_text.size();
  r.image_count = request.images.size();
  for (const auto& img : request.images) r.image_bytes += img.size();
  r.trace_id = request.trace_id;
  r.response_text = response_text;
  return r;
}

fs::path FixtureStore::path_for(const CacheKey& key) const {
  return root_ / key.digest.substr(0, 2) / (key.digest + ".json");
}

std::optional<FixtureRecord> FixtureStore::find(const CacheKey& key) const {
  const fs::path path = path_for(key);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    FixtureRecord r = from_json(json::parse(in));
    if (r.key != key.digest) return std::nullopt;
    return r;
  } catch (const json::exception&) {
    // A torn or hand-edited file is treated as absent.
    return std::nullopt;
  }
}

void FixtureStore::store(const FixtureRecord& record) const {
  const fs::path path = path_for(CacheKey{record.key});
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw StorageError("cannot create " + path.parent_path().string() + ": " + ec.message());

  fs::path tmp = path;
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id() << "." << g_tmp_counter.fetch_add(1);
  tmp += suffix.str();
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << to_json(record).dump(2) << '\n';
    out.close();
    if (!out) {
      fs::remove(tmp, ec);
      throw StorageError("failed writing fixture " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw StorageError("failed publishing fixture " + path.string());
  }
}

ModelResponse ReplayBackend::do_send(const ModelRequest& request) {
  const CacheKey key = CacheKey::of(request);
  auto rec = store_.find(key);
  if (!rec) {
    throw ReplayMiss("no fixture for request " + key.digest +
                     (request.trace_id.empty() ? "" : " (" + request.trace_id + ")") + " in " +
                     store_.root().string());
  }
  return {rec->response_text, 0.0, true};
}

RecordOutcome RecordingBackend::record(const ModelRequest& request) {
  RecordOutcome out{inner_->send(request), std::nullopt};
  const CacheKey key = CacheKey::of(request);
  try {
    store_.store(summarize(request, key, out.response.text));
  } catch (const StorageError& e) {
    storage_failures_.fetch_add(1);
    out.storage_error = e;
  }
  return out;
}

ModelResponse CachingBackend::do_send(const ModelRequest& request) {
  const CacheKey key = CacheKey::of(request);
  for (;;) {
    if (auto rec = store_.find(key)) return {rec->response_text, 0.0, true};

    std::shared_ptr<Pending> pending;
    {
      std::unique_lock lock(mutex_);
      auto it = pending_.find(key.digest);
      if (it != pending_.end()) {
        auto waiting = it->second;
        waiting->cv.wait(lock, [&] { return waiting->done; });
        continue;
      }
      pending = std::make_shared<Pending>();
      pending_.emplace(key.digest, pending);
    }

    auto release = [&] {
      std::lock_guard lock(mutex_);
      pending->done = true;
      pending_.erase(key.digest);
      pending->cv.notify_all();
    };
    try {
      ModelResponse r = inner_->send(request);
      inner_calls_.fetch_add(1);
      try {
        store_.store(summarize(request, key, r.text));
      } catch (const StorageError&) {
        // Uncacheable is not fatal; the caller still gets the answer.
      }
      release();
      r.from_cache = false;
      return r;
    } catch (...) {
      release();
      throw;
    }
  }
}

ModelResponse ScriptedBackend::do_send(const ModelRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  calls_.fetch_add(1);
  std::string text = script_(request);
  const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
  return {std::move(text), elapsed.count(), false};
}

}  // namespace msprompt
