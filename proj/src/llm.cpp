#include "socsim/llm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "socsim/domain.hpp"
#include "socsim/errors.hpp"
#include "socsim/hash.hpp"

namespace socsim {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System:
      return "system";
    case Role::User:
      return "user";
    case Role::Assistant:
      return "assistant";
  }
  return "user";
}

namespace {

std::string_view format_name(ResponseFormat f) {
  return f == ResponseFormat::JsonObject ? "json_object" : "free_text";
}

void check_request(const ChatRequest& req) {
  if (req.messages.empty()) throw ArgumentError("chat request has no messages");
  if (req.messages.front().role == Role::Assistant) {
    throw ArgumentError("first chat message must be a system or user message");
  }
  if (req.temperature < 0) throw ArgumentError("temperature must be >= 0");
  if (req.max_tokens <= 0) throw ArgumentError("max_tokens must be positive");
}

bool retryable(int status) { return status == 429 || status >= 500; }

class InFlightSlot {
 public:
  explicit InFlightSlot(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~InFlightSlot() { sem_.release(); }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

json response_json(const ChatResponse& r) {
  return json{{"content", r.content},
              {"finish_reason", r.finish_reason},
              {"prompt_tokens", r.prompt_tokens},
              {"completion_tokens", r.completion_tokens}};
}

}  // namespace

json wire_request(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body{{"model", req.model},
            {"messages", std::move(messages)},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
  if (req.response_format == ResponseFormat::JsonObject) {
    body["response_format"] = {{"type", "json_object"}};
  }
  return body;
}

ChatResponse parse_wire_response(const std::string& body) {
  const auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw TransportError("chat completion body is not JSON");
  }
  ChatResponse r;
  try {
    const auto& choice = doc.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    if (content.is_string()) r.content = content.get<std::string>();
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
      r.finish_reason = choice["finish_reason"].get<std::string>();
    }
    if (doc.contains("usage") && doc["usage"].is_object()) {
      r.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
      r.completion_tokens = doc["usage"].value("completion_tokens", 0);
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("unexpected chat completion shape: ") + e.what());
  }
  if (r.content.empty()) throw TransportError("chat completion has empty content");
  return r;
}

std::string cache_key(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  const json canonical{{"model", req.model},
                       {"messages", std::move(messages)},
                       {"temperature", req.temperature},
                       {"max_tokens", req.max_tokens},
                       {"response_format", format_name(req.response_format)}};
  return sha256_hex(canonical.dump());
}

JsonCache::JsonCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::optional<json> JsonCache::load(const std::string& key) const {
  std::lock_guard lock(mutex_);
  const auto path = dir_ / (key + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  auto doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw DataError("corrupt cache entry " + path.string());
  return doc;
}

void JsonCache::store(const std::string& key, const json& doc) {
  std::lock_guard lock(mutex_);
  std::filesystem::create_directories(dir_);
  write_file_atomic(dir_ / (key + ".json"), doc.dump(2));
}

CacheMode cache_mode_from_string(std::string_view name) {
  if (name == "live") return CacheMode::Live;
  if (name == "record") return CacheMode::Record;
  if (name == "replay") return CacheMode::Replay;
  throw ConfigError("unknown llm mode '" + std::string(name) +
                    "' (expected live, record or replay)");
}

std::string_view to_string(CacheMode mode) {
  switch (mode) {
    case CacheMode::Live:
      return "live";
    case CacheMode::Record:
      return "record";
    case CacheMode::Replay:
      return "replay";
  }
  return "record";
}

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
  const double ms = static_cast<double>(initial_delay.count()) *
                    std::pow(backoff_factor, std::max(0, attempt - 1));
  const double capped = std::min(ms, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<long long>(capped));
}

LlmClient::LlmClient(LlmClientOptions options, std::shared_ptr<Transport> transport,
                     Sleeper sleeper)
    : options_(std::move(options)),
      transport_(std::move(transport)),
      sleeper_(sleeper ? std::move(sleeper)
                       : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      cache_(options_.cache_dir),
      in_flight_(std::max(1, options_.max_in_flight)) {}

ChatResponse LlmClient::chat(const ChatRequest& req) {
  check_request(req);
  ++requests_;
  const auto key = cache_key(req);

  if (options_.mode != CacheMode::Live) {
    if (auto entry = cache_.load(key)) {
      ChatResponse r;
      const auto& resp = entry->at("response");
      r.content = resp.at("content").get<std::string>();
      r.finish_reason = resp.value("finish_reason", "");
      r.prompt_tokens = resp.value("prompt_tokens", 0);
      r.completion_tokens = resp.value("completion_tokens", 0);
      r.from_cache = true;
      ++cache_hits_;
      return r;
    }
    if (options_.mode == CacheMode::Replay) throw CacheMissError(key);
  }

  auto r = send_with_retries(req);
  prompt_tokens_ += r.prompt_tokens;
  completion_tokens_ += r.completion_tokens;
  if (options_.mode == CacheMode::Record) {
    cache_.store(key, json{{"key", key},
                           {"request", wire_request(req)},
                           {"response", response_json(r)}});
  }
  return r;
}

ChatResponse LlmClient::send_with_retries(const ChatRequest& req) {
  if (!transport_) throw TransportError("no transport configured");
  HttpRequest http;
  auto base = options_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  http.url = base + "/chat/completions";
  http.headers = {{"Content-Type", "application/json"}};
  if (!options_.api_key.empty()) {
    http.headers.emplace_back("Authorization", "Bearer " + options_.api_key);
  }
  http.body = wire_request(req).dump();

  std::string last_error;
  for (int attempt = 0; attempt <= options_.retry.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(options_.retry.delay_for(attempt));
    HttpResponse resp;
    try {
      InFlightSlot slot(in_flight_);
      ++network_calls_;
      resp = transport_->post(http);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (resp.status == 200) {
      try {
        return parse_wire_response(resp.body);
      } catch (const TransportError& e) {
        last_error = e.what();
        continue;
      }
    }
    last_error = "HTTP " + std::to_string(resp.status);
    if (!retryable(resp.status)) {
      throw TransportError("chat completion failed: " + last_error + ": " +
                           resp.body.substr(0, 300));
    }
  }
  throw TransportError("chat completion failed after " +
                       std::to_string(options_.retry.max_retries + 1) +
                       " attempts: " + last_error);
}

UsageReport LlmClient::usage_report() const {
  return UsageReport{requests_.load(), cache_hits_.load(), network_calls_.load(),
                     prompt_tokens_.load(), completion_tokens_.load()};
}

void apply_llm_environment(LlmClientOptions& options) {
  auto env = [](const char* a, const char* b) -> const char* {
    if (const char* v = std::getenv(a); v && *v) return v;
    if (const char* v = std::getenv(b); v && *v) return v;
    return nullptr;
  };
  if (const char* url = env("SOCSIM_LLM_BASE_URL", "OPENAI_BASE_URL")) options.base_url = url;
  if (const char* key = env("SOCSIM_LLM_API_KEY", "OPENAI_API_KEY")) options.api_key = key;
}

}  // namespace socsim
