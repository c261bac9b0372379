#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "socsim/agents.hpp"
#include "socsim/domain.hpp"
#include "socsim/events.hpp"
#include "socsim/ingestion.hpp"
#include "socsim/interventions.hpp"
#include "socsim/llm.hpp"
#include "socsim/metrics.hpp"
#include "socsim/rng.hpp"

namespace socsim {

/// 1 + repost_count for each candidate, unnormalized. Throws ArgumentError
/// for an empty candidate list.
std::vector<double> engagement_weights(const PlatformState& state, std::span<const PostId> candidates);

struct TimelineOptions {
  int discovery_window = 0;  // only posts from the last N steps are discoverable; 0 = all
};

/// Up to 5 followed slots (newest activity first; a followee's repost
/// surfaces the original post) and up to 5 discovery slots chosen by
/// `policy` among posts by authors the user neither is nor follows.
Timeline build_timeline(const PlatformState& state, UserId user, FeedPolicy& policy, Rng& rng,
                        const TimelineOptions& options = {});

/// Texts of the user's newest `k` posts, newest first.
std::vector<std::string> recent_posts_of(const PlatformState& state, UserId user, std::size_t k);

struct StepEnv {
  AgentBackend& backend;
  FeedPolicy& policy;
  const NewsCorpus& news;
  VisibilityFlags visibility{};
  TimelineOptions timeline{};
  std::size_t recent_posts = 3;
  std::size_t headlines = kHeadlinesPerStep;
};

/// One step: picks a user uniformly, shows them headlines and a timeline,
/// applies their decision and returns the event. Invalid or conflicting
/// decisions become skips. Only CacheMissError escapes.
EventRecord step(PlatformState& state, const StepEnv& env, Rng& rng);

struct BackendConfig {
  std::string kind = "stub";  // stub | llm
  StubParams stub;
};

struct LlmConfig {
  LlmAgentSettings agent;
  CacheMode mode = CacheMode::Record;
  std::string cache_dir = "cache/llm";
  std::string base_url;  // empty: environment, then the OpenAI default
  int max_retries = 4;
  int max_in_flight = 8;
};

struct BridgingConfig {
  std::string scorer = "local";  // local | perspective
  std::vector<std::string> attributes = default_bridging_attributes();
  CacheMode mode = CacheMode::Record;
  std::string cache_dir = "cache/perspective";
};

struct DataConfig {
  std::string personas_path;  // empty: synthesized personas
  std::string news_path;      // empty: synthesized headlines
  std::string templates_dir;  // empty: bundled templates
  bool enrich = false;
  std::string enrichment_cache_dir = "cache/enrichment";
};

struct RunConfig {
  std::size_t n_users = 500;
  int n_steps = 10000;
  std::uint64_t seed = 0;
  std::string intervention = "base";
  double out_partisan_alpha = 1.0;
  int discovery_window = 0;
  int snapshot_every = 1000;
  std::size_t recent_posts = 3;
  std::size_t headlines_per_step = kHeadlinesPerStep;
  BackendConfig backend;
  LlmConfig llm;
  BridgingConfig bridging;
  DataConfig data;

  /// Relative data and cache paths are resolved against this directory. Not
  /// part of the serialized config.
  std::filesystem::path base_dir;

  /// Throws ConfigError naming the first bad field.
  void validate() const;
  nlohmann::json to_json() const;
  /// Strict: unknown keys are a ConfigError.
  static RunConfig from_json(const nlohmann::json& doc);
  /// Reads and validates a config file; base_dir becomes the file's directory.
  static RunConfig load(const std::filesystem::path& path);
  /// SHA-256 of the canonical JSON form.
  std::string hash() const;
  std::filesystem::path resolve(const std::string& path) const;
};

/// Test and CLI hooks. Anything left empty is built from the config.
struct RunDependencies {
  std::shared_ptr<Transport> llm_transport;
  std::shared_ptr<Transport> perspective_transport;
  Sleeper sleeper;
  AgentBackend* backend = nullptr;
  BridgingScorer* scorer = nullptr;
  std::optional<std::vector<Persona>> personas;
  std::optional<NewsCorpus> news;
  std::function<void(const std::string&)> log;
};

struct RunResult {
  std::filesystem::path events_path;
  std::filesystem::path snapshot_path;
  PlatformState final_state;
  std::vector<EventRecord> events;
  RunSummary summary;
  std::string config_hash;
  std::vector<std::string> warnings;
  UsageReport llm_usage;
  bool personas_with_replacement = false;
};

/// Executes `config.n_steps` steps, writing `events.jsonl` incrementally and
/// `snapshot.json` every `snapshot_every` steps and at the end into `out_dir`.
RunResult run(const RunConfig& config, const std::filesystem::path& out_dir,
              RunDependencies deps = {});

/// Personas for a config: loaded and sampled from `data.personas_path`, or
/// synthesized. `with_replacement` reports how a loaded pool was sampled.
std::vector<Persona> personas_for(const RunConfig& config, bool* with_replacement = nullptr);
NewsCorpus news_for(const RunConfig& config);

}  // namespace socsim
