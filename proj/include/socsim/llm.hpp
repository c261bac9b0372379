#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace socsim {

enum class Role { System, User, Assistant };
enum class ResponseFormat { FreeText, JsonObject };

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  int max_tokens = 512;
  ResponseFormat response_format = ResponseFormat::FreeText;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

struct ChatResponse {
  std::string content;
  std::string finish_reason;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  bool from_cache = false;
};

std::string_view to_string(Role role);

/// Body of a POST to `<base_url>/chat/completions`.
nlohmann::json wire_request(const ChatRequest& req);
/// Parses a chat-completions response body. Throws TransportError when the
/// body is not a completion or the content is empty.
ChatResponse parse_wire_response(const std::string& body);

/// Stable key over every field of the request.
std::string cache_key(const ChatRequest& req);

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Sends one HTTP POST. Implementations throw TransportError on connection
/// failures and timeouts; HTTP error statuses are returned, not thrown.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

struct HttpTimeouts {
  std::chrono::seconds connect{10};
  std::chrono::seconds read{120};
};

/// Real network transport (cpp-httplib, TLS via OpenSSL).
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(HttpTimeouts timeouts = {}) : timeouts_(timeouts) {}
  HttpResponse post(const HttpRequest& request) override;

 private:
  HttpTimeouts timeouts_;
};

/// Directory of JSON documents keyed by a hex digest. Safe for concurrent use.
class JsonCache {
 public:
  explicit JsonCache(std::filesystem::path dir);

  std::optional<nlohmann::json> load(const std::string& key) const;
  void store(const std::string& key, const nlohmann::json& doc);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
};

enum class CacheMode { Live, Record, Replay };

CacheMode cache_mode_from_string(std::string_view name);
std::string_view to_string(CacheMode mode);

struct RetryPolicy {
  int max_retries = 4;
  std::chrono::milliseconds initial_delay{1000};
  double backoff_factor = 2.0;
  std::chrono::milliseconds max_delay{30000};

  /// Delay before retry number `attempt` (1-based), capped at max_delay.
  std::chrono::milliseconds delay_for(int attempt) const;
};

struct LlmClientOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  CacheMode mode = CacheMode::Record;
  std::filesystem::path cache_dir = "cache/llm";
  RetryPolicy retry;
  int max_in_flight = 8;
};

struct UsageReport {
  long requests = 0;
  long cache_hits = 0;
  long network_calls = 0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// OpenAI-compatible chat-completions client with a record/replay cache.
///
/// Live mode always goes to the network. Record mode serves cached entries
/// and writes new ones. Replay mode never touches the transport and throws
/// CacheMissError for unseen requests.
class LlmClient {
 public:
  LlmClient(LlmClientOptions options, std::shared_ptr<Transport> transport,
            Sleeper sleeper = {});

  LlmClient(const LlmClient&) = delete;
  LlmClient& operator=(const LlmClient&) = delete;

  ChatResponse chat(const ChatRequest& req);
  UsageReport usage_report() const;
  const LlmClientOptions& options() const { return options_; }

 private:
  ChatResponse send_with_retries(const ChatRequest& req);

  LlmClientOptions options_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  JsonCache cache_;
  std::counting_semaphore<> in_flight_;

  std::atomic<long> requests_{0};
  std::atomic<long> cache_hits_{0};
  std::atomic<long> network_calls_{0};
  std::atomic<long> prompt_tokens_{0};
  std::atomic<long> completion_tokens_{0};
};

/// Reads base URL and key from SOCSIM_LLM_BASE_URL / OPENAI_BASE_URL and
/// SOCSIM_LLM_API_KEY / OPENAI_API_KEY, leaving fields untouched when unset.
void apply_llm_environment(LlmClientOptions& options);

}  // namespace socsim
