#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "socsim/errors.hpp"
#include "socsim/llm.hpp"

namespace socsim {

/// Per-attribute scores in [0, 1] and their unweighted mean.
struct BridgingScore {
  std::vector<std::pair<std::string, double>> attributes;
  double aggregate = 0;
};

/// affinity, compassion, curiosity, nuance, personal_story, reasoning, respect
const std::vector<std::string>& default_bridging_attributes();

class ScorerError : public Error {
 public:
  using Error::Error;
};

class BridgingScorer {
 public:
  virtual ~BridgingScorer() = default;
  /// Throws ArgumentError for empty text and ScorerError when scoring fails.
  virtual BridgingScore score(std::string_view text) = 0;
};

/// Offline scorer: counts cue words per attribute and maps `k` hits to
/// 1 - 2^-k. Deterministic per text.
class LexiconBridgingScorer final : public BridgingScorer {
 public:
  explicit LexiconBridgingScorer(std::vector<std::string> attributes = default_bridging_attributes());
  BridgingScore score(std::string_view text) override;

 private:
  std::vector<std::string> attributes_;
};

struct PerspectiveOptions {
  std::string endpoint = "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze";
  std::string api_key;
  std::vector<std::string> attributes = default_bridging_attributes();
  CacheMode mode = CacheMode::Record;
  std::filesystem::path cache_dir = "cache/perspective";
  RetryPolicy retry;
};

/// Attribute name as requested from the Perspective API, e.g.
/// "personal_story" -> "PERSONAL_STORY_EXPERIMENTAL".
std::string perspective_attribute(std::string_view name);

/// Remote scorer backed by the Perspective API's bridging attributes, with a
/// cache keyed by text hash (same record/replay semantics as LlmClient).
class PerspectiveScorer final : public BridgingScorer {
 public:
  PerspectiveScorer(PerspectiveOptions options, std::shared_ptr<Transport> transport,
                    Sleeper sleeper = {});
  BridgingScore score(std::string_view text) override;
  long network_calls() const { return network_calls_.load(); }

 private:
  BridgingScore parse(const nlohmann::json& response) const;

  PerspectiveOptions options_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  JsonCache cache_;
  std::atomic<long> network_calls_{0};
};

/// Reads PERSPECTIVE_API_KEY when set.
void apply_perspective_environment(PerspectiveOptions& options);

}  // namespace socsim
