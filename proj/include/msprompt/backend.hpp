#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "msprompt/errors.hpp"

namespace msprompt {

struct GenerationParams {
  double temperature = 0.0;
  int max_output_tokens = 8192;
  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

struct ModelRequest {
  std::string model_id;
  std::string instruction_text;
  // PNG payloads in prompt order.
  std::vector<std::vector<std::uint8_t>> images;
  GenerationParams generation;
  // Caller bookkeeping (sample id); excluded from the cache key.
  std::string trace_id;
};

struct ModelResponse {
  std::string text;
  double latency_ms = 0.0;
  bool from_cache = false;
};

// SHA-256 over length-framed (model_id, generation params, instruction text,
// each image).
struct CacheKey {
  std::string digest;  // 64 lowercase hex chars

  static CacheKey of(const ModelRequest& request);
  friend bool operator==(const CacheKey&, const CacheKey&) = default;
  friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

struct BackendStats {
  std::uint64_t requests = 0;
  std::uint64_t served_from_cache = 0;
};

// Callable from many threads at once.
class Backend {
 public:
  virtual ~Backend() = default;

  ModelResponse send(const ModelRequest& request);
  virtual std::string identity() const = 0;
  BackendStats stats() const noexcept { return {requests_.load(), cache_hits_.load()}; }

 protected:
  virtual ModelResponse do_send(const ModelRequest& request) = 0;

 private:
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
};

// One persisted exchange. The request is summarised, not stored in full.
struct FixtureRecord {
  std::string key;
  std::string model_id;
  GenerationParams generation;
  std::string instruction_sha256;
  std::size_t instruction_chars = 0;
  std::size_t image_count = 0;
  std::size_t image_bytes = 0;
  std::string trace_id;
  std::string response_text;
};

FixtureRecord summarize(const ModelRequest& request, const CacheKey& key, const std::string& response_text);

// Content-addressed directory: <root>/<first two hex>/<digest>.json. Writes
// go to a temporary file and are renamed into place.
class FixtureStore {
 public:
  explicit FixtureStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path path_for(const CacheKey& key) const;
  std::optional<FixtureRecord> find(const CacheKey& key) const;
  // Throws StorageError.
  void store(const FixtureRecord& record) const;

 private:
  std::filesystem::path root_;
};

// Serves fixtures only; unknown keys throw ReplayMiss.
class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(std::filesystem::path fixture_dir) : store_(std::move(fixture_dir)) {}
  std::string identity() const override { return "replay:" + store_.root().generic_string(); }

 protected:
  ModelResponse do_send(const ModelRequest& request) override;

 private:
  FixtureStore store_;
};

struct RecordOutcome {
  ModelResponse response;
  // Set when persisting failed; the response is still valid.
  std::optional<StorageError> storage_error;
};

// Forwards to `inner` and persists every exchange for later replay.
class RecordingBackend final : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path fixture_dir)
      : inner_(std::move(inner)), store_(std::move(fixture_dir)) {}

  RecordOutcome record(const ModelRequest& request);
  std::string identity() const override { return "record(" + inner_->identity() + ")"; }
  std::uint64_t storage_failures() const noexcept { return storage_failures_.load(); }

 protected:
  ModelResponse do_send(const ModelRequest& request) override { return record(request).response; }

 private:
  std::shared_ptr<Backend> inner_;
  FixtureStore store_;
  std::atomic<std::uint64_t> storage_failures_{0};
};

// Read-through cache over `inner`. Concurrent identical requests wait for the
// first one instead of reaching `inner` twice.
class CachingBackend final : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path cache_dir)
      : inner_(std::move(inner)), store_(std::move(cache_dir)) {}

  std::string identity() const override { return "cache(" + inner_->identity() + ")"; }
  std::uint64_t inner_calls() const noexcept { return inner_calls_.load(); }

 protected:
  ModelResponse do_send(const ModelRequest& request) override;

 private:
  struct Pending {
    bool done = false;
    std::condition_variable cv;
  };

  std::shared_ptr<Backend> inner_;
  FixtureStore store_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Pending>> pending_;
  std::atomic<std::uint64_t> inner_calls_{0};
};

// Test double driven by a function of the request.
class ScriptedBackend final : public Backend {
 public:
  using Script = std::function<std::string(const ModelRequest&)>;
  explicit ScriptedBackend(Script script, std::string name = "scripted")
      : script_(std::move(script)), name_(std::move(name)) {}

  std::string identity() const override { return name_; }
  std::uint64_t calls() const noexcept { return calls_.load(); }

 protected:
  ModelResponse do_send(const ModelRequest& request) override;

 private:
  Script script_;
  std::string name_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace msprompt
