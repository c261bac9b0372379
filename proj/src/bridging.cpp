#include "socsim/bridging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <thread>

#include "socsim/hash.hpp"

namespace socsim {

using nlohmann::json;

const std::vector<std::string>& default_bridging_attributes() {
  static const std::vector<std::string> attrs = {"affinity", "compassion", "curiosity", "nuance",
                                                 "personal_story", "reasoning", "respect"};
  return attrs;
}

namespace {

const std::map<std::string, std::set<std::string>>& lexicon() {
  static const std::map<std::string, std::set<std::string>> words = {
      {"affinity", {"we", "us", "our", "together", "common", "share", "shared", "both",
                    "neighbors", "community", "agree"}},
      {"compassion", {"care", "sorry", "hope", "support", "help", "understand", "feel",
                      "struggle", "struggling", "kind", "heart"}},
      {"curiosity", {"why", "how", "wonder", "curious", "question", "learn", "explore",
                     "what", "interested"}},
      {"nuance", {"however", "although", "but", "complicated", "complex", "depends", "both",
                  "while", "perhaps", "maybe", "sides"}},
      {"personal_story", {"i", "my", "me", "i'm", "remember", "family", "experience", "myself",
                          "grew"}},
      {"reasoning", {"because", "therefore", "evidence", "data", "since", "reason", "study",
                     "suggests", "means", "so"}},
      {"respect", {"respect", "thank", "thanks", "appreciate", "fair", "please", "listen",
                   "valid", "point"}},
  };
  return words;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

BridgingScore finish(std::vector<std::pair<std::string, double>> attrs) {
  BridgingScore s;
  s.attributes = std::move(attrs);
  double sum = 0;
  for (const auto& [name, v] : s.attributes) sum += v;
  s.aggregate = s.attributes.empty() ? 0.0 : sum / static_cast<double>(s.attributes.size());
  return s;
}

}  // namespace

LexiconBridgingScorer::LexiconBridgingScorer(std::vector<std::string> attributes)
    : attributes_(std::move(attributes)) {
  for (const auto& a : attributes_) {
    if (!lexicon().count(a)) throw ConfigError("no lexicon for bridging attribute '" + a + "'");
  }
}

BridgingScore LexiconBridgingScorer::score(std::string_view text) {
  if (text.empty()) throw ArgumentError("cannot score empty text");
  const auto tokens = tokenize(text);
  std::vector<std::pair<std::string, double>> attrs;
  for (const auto& a : attributes_) {
    const auto& cues = lexicon().at(a);
    int hits = 0;
    for (const auto& t : tokens) hits += cues.count(t) ? 1 : 0;
    attrs.emplace_back(a, 1.0 - std::pow(0.5, hits));
  }
  return finish(std::move(attrs));
}

std::string perspective_attribute(std::string_view name) {
  std::string out;
  for (char c : name) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out + "_EXPERIMENTAL";
}

PerspectiveScorer::PerspectiveScorer(PerspectiveOptions options, std::shared_ptr<Transport> transport,
                                     Sleeper sleeper)
    : options_(std::move(options)),
      transport_(std::move(transport)),
      sleeper_(sleeper ? std::move(sleeper)
                       : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      cache_(options_.cache_dir) {}

BridgingScore PerspectiveScorer::parse(const json& response) const {
  std::vector<std::pair<std::string, double>> attrs;
  try {
    const auto& scores = response.at("attributeScores");
    for (const auto& a : options_.attributes) {
      const double v = scores.at(perspective_attribute(a)).at("summaryScore").at("value").get<double>();
      attrs.emplace_back(a, std::clamp(v, 0.0, 1.0));
    }
  } catch (const json::exception& e) {
    throw ScorerError(std::string("unexpected Perspective response: ") + e.what());
  }
  return finish(std::move(attrs));
}

BridgingScore PerspectiveScorer::score(std::string_view text) {
  if (text.empty()) throw ArgumentError("cannot score empty text");
  json requested = json::object();
  for (const auto& a : options_.attributes) requested[perspective_attribute(a)] = json::object();
  const json body{{"comment", {{"text", text}}},
                  {"requestedAttributes", requested},
                  {"languages", {"en"}},
                  {"doNotStore", true}};
  const auto key = sha256_hex(json{{"text", text}, {"attributes", options_.attributes}}.dump());

  if (options_.mode != CacheMode::Live) {
    if (auto hit = cache_.load(key)) return parse(hit->at("response"));
    if (options_.mode == CacheMode::Replay) throw CacheMissError(key);
  }
  if (!transport_) throw ScorerError("no transport configured");

  HttpRequest http;
  http.url = options_.endpoint + (options_.api_key.empty() ? "" : "?key=" + options_.api_key);
  http.headers = {{"Content-Type", "application/json"}};
  http.body = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= options_.retry.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(options_.retry.delay_for(attempt));
    HttpResponse resp;
    try {
      ++network_calls_;
      resp = transport_->post(http);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (resp.status == 200) {
      const auto doc = json::parse(resp.body, nullptr, false);
      if (doc.is_discarded()) {
        last_error = "non-JSON response";
        continue;
      }
      auto s = parse(doc);
      if (options_.mode == CacheMode::Record) {
        cache_.store(key, json{{"key", key}, {"request", body}, {"response", doc}});
      }
      return s;
    }
    last_error = "HTTP " + std::to_string(resp.status);
    if (resp.status != 429 && resp.status < 500) break;
  }
  throw ScorerError("Perspective scoring failed: " + last_error);
}

void apply_perspective_environment(PerspectiveOptions& options) {
  if (const char* key = std::getenv("PERSPECTIVE_API_KEY"); key && *key) options.api_key = key;
}

}  // namespace socsim
