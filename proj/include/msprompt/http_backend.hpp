#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "msprompt/backend.hpp"

namespace msprompt {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpReply {
  // 0 when no HTTP response arrived (connection failure, timeout).
  int status = 0;
  std::string body;
  std::string error;
};

// Seam between the backend and the network; tests substitute fakes.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpReply post_json(const std::string& url, const std::string& body, const Headers& headers,
                              std::chrono::milliseconds timeout) = 0;
};

// cpp-httplib client; http:// and https:// URLs.
std::unique_ptr<HttpTransport> make_default_transport();

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

// Bounds concurrent requests and spaces request starts to at most
// `requests_per_minute` (0 = unlimited).
class RateLimiter {
 public:
  RateLimiter(double requests_per_minute, int max_in_flight, Sleeper sleeper = real_sleeper());

  class Permit {
   public:
    explicit Permit(RateLimiter* owner) : owner_(owner) {}
    Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit() {
      if (owner_) owner_->release();
    }

   private:
    RateLimiter* owner_;
  };

  Permit acquire();
  int in_flight() const;
  int max_in_flight() const noexcept { return max_in_flight_; }

 private:
  void release();

  double requests_per_minute_;
  int max_in_flight_;
  Sleeper sleeper_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  std::chrono::steady_clock::time_point next_start_{};
};

struct HttpBackendConfig {
  // May contain "{model}", replaced by the request's model id.
  std::string endpoint;
  // Environment variable holding the credential; unset variable sends none.
  std::string api_key_env = "MSPROMPT_API_KEY";
  // Header carrying the credential; "Authorization" gets a "Bearer " prefix.
  std::string auth_header = "Authorization";
  double requests_per_minute = 0.0;
  int max_in_flight = 4;
  int max_attempts = 4;
  std::chrono::milliseconds timeout{120000};
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::milliseconds max_backoff{30000};
};

// Reference wire schema:
//   {"model": ..., "contents": [{"role": "user", "parts": [{"text": ...},
//    {"inline_data": {"mime_type": "image/png", "data": <base64>}}, ...]}],
//    "generationConfig": {"temperature": ..., "maxOutputTokens": ...}}
std::string encode_generate_request(const ModelRequest& request);
// Accepts {"text": ...} or {"candidates": [{"content": {"parts": [{"text": ...}]}}]}.
// Throws TransportError on anything else.
std::string decode_generate_response(const std::string& body);

// Retries timeouts, 429 and 5xx with exponential backoff up to max_attempts.
// 401/403 throw AuthError immediately; other statuses throw TransportError.
class HttpBackend final : public Backend {
 public:
  HttpBackend(HttpBackendConfig config, std::unique_ptr<HttpTransport> transport = make_default_transport(),
              Sleeper sleeper = real_sleeper());

  std::string identity() const override { return "http:" + config_.endpoint; }
  std::uint64_t attempts() const noexcept { return attempts_.load(); }
  const RateLimiter& limiter() const noexcept { return limiter_; }

 protected:
  ModelResponse do_send(const ModelRequest& request) override;

 private:
  std::chrono::milliseconds backoff_for(int attempt) const;

  HttpBackendConfig config_;
  std::unique_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  RateLimiter limiter_;
  std::atomic<std::uint64_t> attempts_{0};
};

}  // namespace msprompt
