#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "socsim/domain.hpp"
#include "socsim/events.hpp"

namespace socsim {

struct EiIndex {
  double value = 0;
  long external = 0;
  long internal = 0;
  long dropped = 0;  // edges with a NonPartisan endpoint
};

/// (E - I) / (E + I) over directed follow edges between Democrats and
/// Republicans; edges touching a NonPartisan user are dropped. Throws
/// UndefinedMetricError when no edge is classified.
EiIndex ei_index(std::span<const FollowEdge> follows, std::span<const Persona> personas);

/// Mean-absolute-difference Gini, sum|x_i - x_j| / (2 n^2 mean). All-zero
/// input is 0. Throws ArgumentError for empty or negative input.
double gini(std::span<const double> values);

/// Sample Pearson correlation. Throws ArgumentError for mismatched or short
/// input and UndefinedMetricError when either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Share of the total held by the largest ceil(fraction * n) values.
double top_share(std::span<const double> values, double fraction);

/// Asynchronous label propagation on the undirected projection of the follow
/// graph. Each pass starts from singleton labels; nodes are visited in a
/// seeded random order and adopt the most frequent neighbour label (smallest
/// label on ties) until nothing changes or `max_iters` sweeps. A single pass
/// can flood one label across a bridge, so `restarts` passes are run and the
/// partition with the highest modularity is kept (the first on ties).
/// Returns one community id per user, numbered 0.. in order of first
/// appearance. Deterministic given `seed`.
std::vector<int> label_propagation(std::size_t n_users, std::span<const FollowEdge> follows,
                                   std::uint64_t seed, int max_iters = 100, int restarts = 10);

/// One run's statistics. Metrics that are undefined for the run are absent
/// and their cause is recorded in `undefined`.
struct RunSummary {
  std::optional<double> ei_index;
  std::optional<double> ei_dropped_edges;
  std::optional<double> corr_partisan_followers;
  std::optional<double> corr_partisan_reposts;
  std::optional<double> gini_followers;
  std::optional<double> gini_reposts;
  std::optional<double> top10_share_followers;
  std::optional<double> top10_share_reposts;
  std::optional<double> share_post;    // % of non-skip steps
  std::optional<double> share_repost;  // % of non-skip steps
  std::optional<double> share_follow;  // % of non-skip steps that include a follow
  std::optional<double> max_followers;
  std::optional<double> avg_followers;
  std::optional<double> max_reposts;   // per post
  std::optional<double> avg_reposts;   // per post
  std::optional<double> n_steps;
  std::optional<double> n_skips;
  std::map<std::string, std::string> undefined;

  /// Every metric, in CSV column order.
  std::vector<std::pair<std::string_view, std::optional<double>>> fields() const;
  /// Mutable access by column name; nullptr for unknown names.
  std::optional<double>* field(std::string_view name);
};

/// Network metrics from `state`; action shares from `events`.
RunSummary summarize_run(std::span<const EventRecord> events, const PlatformState& state);

/// Network metrics only, for a snapshot without its event log.
RunSummary summarize_state(const PlatformState& state);

struct FieldAggregate {
  double mean = 0;
  std::optional<double> se;  // sd / sqrt(k); absent for a single run
  std::size_t n = 0;
};

/// Mean and standard error of each field over runs that define it.
std::map<std::string, FieldAggregate> aggregate_runs(std::span<const RunSummary> runs);

/// Per-condition aggregates.
std::map<std::string, std::map<std::string, FieldAggregate>> aggregate_conditions(
    const std::map<std::string, std::vector<RunSummary>>& by_condition);

}  // namespace socsim
