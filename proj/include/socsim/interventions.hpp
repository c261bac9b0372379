#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "socsim/agents.hpp"
#include "socsim/bridging.hpp"
#include "socsim/domain.hpp"
#include "socsim/rng.hpp"

namespace socsim {

/// Chooses which non-followed posts fill a timeline's discovery slots.
/// Output is a duplicate-free subset of `candidates` of size
/// min(slots, |candidates|).
class FeedPolicy {
 public:
  virtual ~FeedPolicy() = default;
  virtual std::vector<PostId> select(std::span<const PostId> candidates, const Persona& viewer,
                                     const PlatformState& state, Rng& rng,
                                     std::size_t slots = kDiscoverySlots) = 0;
  virtual std::string_view name() const = 0;
  /// Warnings raised since the last call (e.g. scorer failures).
  virtual std::vector<std::string> take_warnings() { return {}; }
};

/// Sequential weighted draws without replacement: each draw picks a
/// remaining candidate with probability proportional to its weight.
std::vector<PostId> sample_without_replacement(std::span<const PostId> candidates,
                                               std::vector<double> weights, std::size_t k,
                                               Rng& rng);

/// Engagement-weighted sampling, weight 1 + reposts.
class BasePolicy final : public FeedPolicy {
 public:
  std::vector<PostId> select(std::span<const PostId> candidates, const Persona& viewer,
                             const PlatformState& state, Rng& rng, std::size_t slots) override;
  std::string_view name() const override { return "base"; }
};

/// Newest first by created_step, ties by higher post_id. Ignores engagement.
class ChronologicalPolicy final : public FeedPolicy {
 public:
  std::vector<PostId> select(std::span<const PostId> candidates, const Persona& viewer,
                             const PlatformState& state, Rng& rng, std::size_t slots) override;
  std::string_view name() const override { return "chronological"; }
};

/// Inverted engagement weighting, weight 1 / (1 + reposts).
class DownplayDominantPolicy final : public FeedPolicy {
 public:
  std::vector<PostId> select(std::span<const PostId> candidates, const Persona& viewer,
                             const PlatformState& state, Rng& rng, std::size_t slots) override;
  std::string_view name() const override { return "downplay_dominant"; }
};

/// Engagement weight boosted by partisan distance:
/// (1 + reposts) * (1 + alpha * |viewer - author|).
class BoostOutPartisanPolicy final : public FeedPolicy {
 public:
  explicit BoostOutPartisanPolicy(double alpha = 1.0) : alpha_(alpha) {}
  std::vector<PostId> select(std::span<const PostId> candidates, const Persona& viewer,
                             const PlatformState& state, Rng& rng, std::size_t slots) override;
  std::string_view name() const override { return "boost_out_partisan"; }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

/// Deterministic top-k by bridging aggregate, ties by higher post_id. Scores
/// are computed once per post; a failed score counts as 0 and is reported
/// through take_warnings().
class BridgingPolicy final : public FeedPolicy {
 public:
  explicit BridgingPolicy(BridgingScorer& scorer) : scorer_(scorer) {}
  std::vector<PostId> select(std::span<const PostId> candidates, const Persona& viewer,
                             const PlatformState& state, Rng& rng, std::size_t slots) override;
  std::string_view name() const override { return "bridging_attributes"; }
  std::vector<std::string> take_warnings() override;

  double score_of(PostId id, const PlatformState& state);

 private:
  BridgingScorer& scorer_;
  std::map<PostId, double> scores_;
  std::vector<std::string> warnings_;
};

/// Known intervention names: base, chronological, downplay_dominant,
/// boost_out_partisan, bridging_attributes, hide_social_statistics,
/// hide_biography.
const std::vector<std::string>& intervention_names();

/// Prompt visibility for an intervention. Throws ConfigError for unknown
/// names.
VisibilityFlags visibility_flags_for(std::string_view intervention);

struct PolicyOptions {
  double out_partisan_alpha = 1.0;
  BridgingScorer* scorer = nullptr;  // required for bridging_attributes
};

/// The discovery policy an intervention uses; the two visibility
/// interventions and "base" use BasePolicy.
std::unique_ptr<FeedPolicy> make_policy(std::string_view intervention, const PolicyOptions& options);

}  // namespace socsim
