#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "socsim/domain.hpp"
#include "socsim/llm.hpp"
#include "socsim/rng.hpp"
#include "socsim/templates.hpp"

namespace socsim {

/// Reads the persona CSV. Required columns: user_id, age, gender,
/// income_bracket, education, partisanship, ideology, religion, interests
/// (semicolon-separated). Optional: biography, occupation.
std::vector<Persona> load_personas(const std::filesystem::path& path);
void write_personas(const std::filesystem::path& path, const std::vector<Persona>& personas);

/// `n` personas drawn uniformly from fixed category lists; partisanship is
/// uniform on [-3, 3].
std::vector<Persona> synthesize_personas(std::size_t n, std::uint64_t seed);

struct PersonaSelection {
  std::vector<Persona> personas;
  bool with_replacement = false;
};

/// Draws `n` personas from a loaded pool: without replacement when the pool
/// is large enough, otherwise with replacement (repeated rows get a `-k`
/// suffix on user_id so ids stay unique).
PersonaSelection select_personas(const std::vector<Persona>& pool, std::size_t n, Rng& rng);

/// Plain-text profile used in prompts.
std::string persona_profile(const Persona& p, bool include_biography);

struct NewsCorpus {
  std::vector<NewsItem> items;
  std::string source_path;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

/// Reads a News-Category-Dataset style JSON-lines file (headline, category,
/// short_description). item_id is the 0-based line number.
NewsCorpus load_news(const std::filesystem::path& path);

/// A deterministic placeholder corpus for runs without a news file.
NewsCorpus synthesize_news(std::size_t n, std::uint64_t seed);

inline constexpr std::size_t kHeadlinesPerStep = 10;

/// min(k, corpus size) distinct items, uniform without replacement.
std::vector<NewsItem> sample_headlines(const NewsCorpus& corpus, std::size_t k, Rng& rng);

struct EnrichmentOptions {
  std::string model = "gpt-4o-mini";
  double temperature = 1.0;
  int max_tokens = 400;
  std::filesystem::path cache_dir = "cache/enrichment";
  int max_in_flight = 8;
};

/// Adds an LLM-written biography and occupation to personas. Results are
/// stored in `cache_dir/<sha256 of persona json>.json`, so repeated runs cost
/// no requests.
class PersonaEnricher {
 public:
  PersonaEnricher(LlmClient& llm, EnrichmentOptions options,
                  const PromptTemplates& templates = PromptTemplates::defaults());

  /// Returns `p` unchanged when it already has a biography. Throws
  /// EnrichmentError when the model cannot produce a usable profile.
  Persona enrich(const Persona& p);

  ChatRequest request_for(const Persona& p) const;
  const EnrichmentOptions& options() const { return options_; }

 private:
  LlmClient& llm_;
  EnrichmentOptions options_;
  PromptTemplates templates_;
  JsonCache cache_;
};

Persona enrich_persona(const Persona& p, PersonaEnricher& enricher);

struct EnrichmentBatch {
  std::vector<Persona> personas;       // same order as input
  std::vector<std::string> failures;   // one message per persona left unenriched
};

/// Enriches independent personas concurrently, at most `max_in_flight` at a
/// time. Failed personas are returned unenriched.
EnrichmentBatch enrich_all(const std::vector<Persona>& personas, PersonaEnricher& enricher);

}  // namespace socsim
