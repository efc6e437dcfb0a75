#include "msprompt/http_backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "msprompt/digest.hpp"

namespace msprompt {

using nlohmann::json;

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttpReply post_json(const std::string& url, const std::string& body, const Headers& headers,
                      std::chrono::milliseconds timeout) override {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(url, m, kUrl)) return {0, {}, "malformed endpoint URL: " + url};
    const std::string origin = m[1].str();
    const std::string path = m[2].matched ? m[2].str() : "/";

    httplib::Client client(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  }
};

bool retryable(int status) noexcept { return status == 0 || status == 408 || status == 429 || status >= 500; }

std::string expand_endpoint(std::string endpoint, const std::string& model_id) {
  const std::string marker = "{model}";
  for (auto pos = endpoint.find(marker); pos != std::string::npos; pos = endpoint.find(marker, pos)) {
    endpoint.replace(pos, marker.size(), model_id);
    pos += model_id.size();
  }
  return endpoint;
}

}  // namespace

std::unique_ptr<HttpTransport> make_default_transport() { return std::make_unique<HttplibTransport>(); }

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

RateLimiter::RateLimiter(double requests_per_minute, int max_in_flight, Sleeper sleeper)
    : requests_per_minute_(requests_per_minute),
      max_in_flight_(std::max(1, max_in_flight)),
      sleeper_(std::move(sleeper)) {}

RateLimiter::Permit RateLimiter::acquire() {
  std::chrono::steady_clock::duration wait{};
  {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
    if (requests_per_minute_ > 0.0) {
      const auto now = std::chrono::steady_clock::now();
      const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(60.0 / requests_per_minute_));
      const auto start = std::max(now, next_start_);
      next_start_ = start + interval;
      wait = start - now;
    }
  }
  Permit permit(this);
  if (wait > std::chrono::steady_clock::duration::zero()) {
    sleeper_(std::chrono::ceil<std::chrono::milliseconds>(wait));
  }
  return permit;
}

void RateLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_one();
}

int RateLimiter::in_flight() const {
  std::lock_guard lock(mutex_);
  return in_flight_;
}

std::string encode_generate_request(const ModelRequest& request) {
  json parts = json::array();
  parts.push_back({{"text", request.instruction_text}});
  for (const auto& img : request.images) {
    parts.push_back({{"inline_data", {{"mime_type", "image/png"}, {"data", base64_encode(img)}}}});
  }
  json doc{{"model", request.model_id},
           {"contents", json::array({{{"role", "user"}, {"parts", parts}}})},
           {"generationConfig",
            {{"temperature", request.generation.temperature},
             {"maxOutputTokens", request.generation.max_output_tokens}}}};
  return doc.dump();
}

std::string decode_generate_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("response is not JSON: ") + e.what());
  }
  if (auto t = doc.find("text"); t != doc.end() && t->is_string()) return t->get<std::string>();
  auto cands = doc.find("candidates");
  if (cands != doc.end() && cands->is_array()) {
    if (cands->empty()) return {};
    std::string text;
    const auto& content = (*cands)[0].value("content", json::object());
    for (const auto& part : content.value("parts", json::array())) {
      if (auto t = part.find("text"); t != part.end() && t->is_string()) text += t->get<std::string>();
    }
    return text;
  }
  throw TransportError("response has neither 'text' nor 'candidates'");
}

HttpBackend::HttpBackend(HttpBackendConfig config, std::unique_ptr<HttpTransport> transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(sleeper),
      limiter_(config_.requests_per_minute, config_.max_in_flight, sleeper) {
  if (config_.endpoint.empty()) throw ConfigError("HTTP backend needs an endpoint URL");
  if (config_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
}

std::chrono::milliseconds HttpBackend::backoff_for(int attempt) const {
  auto d = config_.initial_backoff;
  for (int i = 1; i < attempt && d < config_.max_backoff; ++i) d *= 2;
  return std::min(d, config_.max_backoff);
}

ModelResponse HttpBackend::do_send(const ModelRequest& request) {
  const std::string url = expand_endpoint(config_.endpoint, request.model_id);
  const std::string body = encode_generate_request(request);
  Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      const bool bearer = config_.auth_header == "Authorization";
      headers.emplace_back(config_.auth_header, bearer ? std::string("Bearer ") + key : std::string(key));
    }
  }

  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    HttpReply reply;
    const auto start = std::chrono::steady_clock::now();
    {
      auto permit = limiter_.acquire();
      attempts_.fetch_add(1);
      reply = transport_->post_json(url, body, headers, config_.timeout);
    }
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;

    if (reply.status >= 200 && reply.status < 300) {
      return {decode_generate_response(reply.body), elapsed.count(), false};
    }
    if (reply.status == 401 || reply.status == 403) {
      throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(reply.status) + ")");
    }
    last_error = reply.status == 0 ? "transport failure: " + reply.error : "HTTP " + std::to_string(reply.status);
    if (!retryable(reply.status)) throw TransportError(last_error + " from " + url);
    if (attempt < config_.max_attempts) sleeper_(backoff_for(attempt));
  }
  throw TransportError(last_error + " from " + url + " after " + std::to_string(config_.max_attempts) +
                       " attempts");
}

}  // namespace msprompt
