#include "socsim/interventions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "socsim/engine.hpp"
#include "socsim/errors.hpp"

namespace socsim {

std::vector<PostId> sample_without_replacement(std::span<const PostId> candidates,
                                               std::vector<double> weights, std::size_t k,
                                               Rng& rng) {
  if (weights.size() != candidates.size()) {
    throw ArgumentError("sample_without_replacement: weights and candidates differ in size");
  }
  k = std::min(k, candidates.size());
  std::vector<PostId> out;
  out.reserve(k);
  while (out.size() < k) {
    double total = 0;
    for (double w : weights) total += w;
    if (!(total > 0)) break;
    double u = rng.uniform() * total;
    std::size_t pick = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0) continue;
      pick = i;
      if (u < weights[i]) break;
      u -= weights[i];
    }
    out.push_back(candidates[pick]);
    weights[pick] = 0;
  }
  return out;
}

std::vector<PostId> BasePolicy::select(std::span<const PostId> candidates, const Persona&,
                                       const PlatformState& state, Rng& rng, std::size_t slots) {
  if (candidates.empty()) return {};
  return sample_without_replacement(candidates, engagement_weights(state, candidates), slots, rng);
}

std::vector<PostId> ChronologicalPolicy::select(std::span<const PostId> candidates, const Persona&,
                                                const PlatformState& state, Rng&, std::size_t slots) {
  std::vector<PostId> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end(), [&](PostId a, PostId b) {
    const int sa = state.posts[index_of(a)].created_step;
    const int sb = state.posts[index_of(b)].created_step;
    if (sa != sb) return sa > sb;
    return index_of(a) > index_of(b);
  });
  if (sorted.size() > slots) sorted.resize(slots);
  return sorted;
}

std::vector<PostId> DownplayDominantPolicy::select(std::span<const PostId> candidates,
                                                   const Persona&, const PlatformState& state,
                                                   Rng& rng, std::size_t slots) {
  if (candidates.empty()) return {};
  auto weights = engagement_weights(state, candidates);
  for (auto& w : weights) w = 1.0 / w;
  return sample_without_replacement(candidates, std::move(weights), slots, rng);
}

std::vector<PostId> BoostOutPartisanPolicy::select(std::span<const PostId> candidates,
                                                   const Persona& viewer,
                                                   const PlatformState& state, Rng& rng,
                                                   std::size_t slots) {
  if (candidates.empty()) return {};
  auto weights = engagement_weights(state, candidates);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& author = state.personas[index_of(state.posts[index_of(candidates[i])].author_id)];
    const int distance = std::abs(viewer.partisanship - author.partisanship);
    weights[i] *= 1.0 + alpha_ * distance;
  }
  return sample_without_replacement(candidates, std::move(weights), slots, rng);
}

double BridgingPolicy::score_of(PostId id, const PlatformState& state) {
  if (const auto it = scores_.find(id); it != scores_.end()) return it->second;
  double value = 0;
  try {
    value = scorer_.score(state.posts[index_of(id)].text).aggregate;
  } catch (const CacheMissError&) {
    throw;
  } catch (const Error& e) {
    warnings_.push_back("bridging score for post " + std::to_string(index_of(id)) +
                        " failed, scored 0: " + e.what());
  }
  scores_.emplace(id, value);
  return value;
}

std::vector<PostId> BridgingPolicy::select(std::span<const PostId> candidates, const Persona&,
                                           const PlatformState& state, Rng&, std::size_t slots) {
  std::vector<std::pair<double, PostId>> ranked;
  ranked.reserve(candidates.size());
  for (const auto id : candidates) ranked.emplace_back(score_of(id, state), id);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return index_of(a.second) > index_of(b.second);
  });
  std::vector<PostId> out;
  for (std::size_t i = 0; i < ranked.size() && i < slots; ++i) out.push_back(ranked[i].second);
  return out;
}

std::vector<std::string> BridgingPolicy::take_warnings() {
  std::vector<std::string> out;
  out.swap(warnings_);
  return out;
}

const std::vector<std::string>& intervention_names() {
  static const std::vector<std::string> names = {
      "base", "chronological", "downplay_dominant", "boost_out_partisan", "bridging_attributes",
      "hide_social_statistics", "hide_biography"};
  return names;
}

VisibilityFlags visibility_flags_for(std::string_view intervention) {
  const auto& names = intervention_names();
  if (std::find(names.begin(), names.end(), intervention) == names.end()) {
    throw ConfigError("unknown intervention '" + std::string(intervention) + "'");
  }
  VisibilityFlags flags;
  if (intervention == "hide_social_statistics") flags.show_social_stats = false;
  if (intervention == "hide_biography") flags.show_biographies = false;
  return flags;
}

std::unique_ptr<FeedPolicy> make_policy(std::string_view intervention, const PolicyOptions& options) {
  visibility_flags_for(intervention);  // validates the name
  if (intervention == "chronological") return std::make_unique<ChronologicalPolicy>();
  if (intervention == "downplay_dominant") return std::make_unique<DownplayDominantPolicy>();
  if (intervention == "boost_out_partisan") {
    return std::make_unique<BoostOutPartisanPolicy>(options.out_partisan_alpha);
  }
  if (intervention == "bridging_attributes") {
    if (!options.scorer) throw ConfigError("bridging_attributes needs a bridging scorer");
    return std::make_unique<BridgingPolicy>(*options.scorer);
  }
  return std::make_unique<BasePolicy>();
}

}  // namespace socsim
