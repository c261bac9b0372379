#include "socsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "socsim/errors.hpp"
#include "socsim/rng.hpp"

namespace socsim {

EiIndex ei_index(std::span<const FollowEdge> follows, std::span<const Persona> personas) {
  EiIndex r;
  for (const auto& f : follows) {
    const auto a = personas[index_of(f.follower_id)].party;
    const auto b = personas[index_of(f.followee_id)].party;
    if (a == Party::NonPartisan || b == Party::NonPartisan) {
      ++r.dropped;
    } else if (a == b) {
      ++r.internal;
    } else {
      ++r.external;
    }
  }
  const long total = r.external + r.internal;
  if (total == 0) throw UndefinedMetricError("E-I index needs at least one partisan-to-partisan edge");
  r.value = static_cast<double>(r.external - r.internal) / static_cast<double>(total);
  return r;
}

double gini(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("gini of an empty sample");
  std::vector<double> x(values.begin(), values.end());
  for (double v : x) {
    if (v < 0 || std::isnan(v)) throw ArgumentError("gini requires non-negative values");
  }
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double total = 0;
  double weighted = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += x[i];
    weighted += (2.0 * static_cast<double>(i + 1) - n - 1.0) * x[i];
  }
  if (total == 0) return 0.0;
  return weighted / (n * total);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("pearson: inputs differ in length");
  if (x.size() < 2) throw ArgumentError("pearson needs at least two observations");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw UndefinedMetricError("pearson of a constant sample");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double top_share(std::span<const double> values, double fraction) {
  if (values.empty()) throw ArgumentError("top_share of an empty sample");
  if (!(fraction > 0 && fraction <= 1)) throw ArgumentError("top_share fraction must be in (0, 1]");
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end(), std::greater<>());
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  if (total <= 0) throw UndefinedMetricError("top_share of a zero total");
  // The epsilon keeps exact products such as 0.1 * 50 from rounding up.
  auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(x.size()) - 1e-9));
  m = std::clamp<std::size_t>(m, 1, x.size());
  return std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m), 0.0) / total;
}

namespace {

using Adjacency = std::vector<std::vector<std::size_t>>;

/// One asynchronous pass sequence from singleton labels.
std::vector<std::size_t> propagate_once(const Adjacency& adj, Rng& rng, int max_iters) {
  const auto n = adj.size();
  std::vector<std::size_t> label(n);
  std::iota(label.begin(), label.end(), 0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> count(n, 0);

  for (int iter = 0; iter < max_iters; ++iter) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    bool changed = false;
    for (const auto v : order) {
      if (adj[v].empty()) continue;
      int best_count = 0;
      std::size_t best = label[v];
      for (const auto u : adj[v]) ++count[label[u]];
      for (const auto u : adj[v]) {
        const auto l = label[u];
        if (count[l] > best_count || (count[l] == best_count && l < best)) {
          best_count = count[l];
          best = l;
        }
      }
      for (const auto u : adj[v]) count[label[u]] = 0;
      if (best != label[v]) {
        label[v] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return label;
}

double modularity(const Adjacency& adj, const std::vector<std::size_t>& label) {
  double two_m = 0;
  for (const auto& a : adj) two_m += static_cast<double>(a.size());
  if (two_m == 0) return 0;
  std::map<std::size_t, double> inside, degree;
  for (std::size_t v = 0; v < adj.size(); ++v) {
    degree[label[v]] += static_cast<double>(adj[v].size());
    for (const auto u : adj[v]) {
      if (label[u] == label[v]) inside[label[v]] += 1;
    }
  }
  double q = 0;
  for (const auto& [l, d] : degree) q += inside[l] / two_m - (d / two_m) * (d / two_m);
  return q;
}

}  // namespace

std::vector<int> label_propagation(std::size_t n_users, std::span<const FollowEdge> follows,
                                   std::uint64_t seed, int max_iters, int restarts) {
  if (restarts < 1) throw ArgumentError("label_propagation needs at least one restart");
  std::vector<std::set<std::size_t>> neighbours(n_users);
  for (const auto& f : follows) {
    const auto a = index_of(f.follower_id);
    const auto b = index_of(f.followee_id);
    if (a == b || a >= n_users || b >= n_users) continue;
    neighbours[a].insert(b);
    neighbours[b].insert(a);
  }
  Adjacency adj(n_users);
  for (std::size_t v = 0; v < n_users; ++v) adj[v].assign(neighbours[v].begin(), neighbours[v].end());

  Rng rng(seed);
  std::vector<std::size_t> best;
  double best_q = 0;
  for (int r = 0; r < restarts; ++r) {
    auto label = propagate_once(adj, rng, max_iters);
    const double q = modularity(adj, label);
    if (best.empty() || q > best_q) {
      best = std::move(label);
      best_q = q;
    }
  }

  std::vector<int> community(n_users, -1);
  std::vector<int> renumber(n_users, -1);
  int next = 0;
  for (std::size_t v = 0; v < n_users; ++v) {
    auto& r = renumber[best[v]];
    if (r < 0) r = next++;
    community[v] = r;
  }
  return community;
}

std::vector<std::pair<std::string_view, std::optional<double>>> RunSummary::fields() const {
  return {{"ei_index", ei_index},
          {"ei_dropped_edges", ei_dropped_edges},
          {"corr_partisan_followers", corr_partisan_followers},
          {"corr_partisan_reposts", corr_partisan_reposts},
          {"gini_followers", gini_followers},
          {"gini_reposts", gini_reposts},
          {"top10_share_followers", top10_share_followers},
          {"top10_share_reposts", top10_share_reposts},
          {"share_post", share_post},
          {"share_repost", share_repost},
          {"share_follow", share_follow},
          {"max_followers", max_followers},
          {"avg_followers", avg_followers},
          {"max_reposts", max_reposts},
          {"avg_reposts", avg_reposts},
          {"n_steps", n_steps},
          {"n_skips", n_skips}};
}

std::optional<double>* RunSummary::field(std::string_view name) {
  std::pair<std::string_view, std::optional<double>*> table[] = {
      {"ei_index", &ei_index},
      {"ei_dropped_edges", &ei_dropped_edges},
      {"corr_partisan_followers", &corr_partisan_followers},
      {"corr_partisan_reposts", &corr_partisan_reposts},
      {"gini_followers", &gini_followers},
      {"gini_reposts", &gini_reposts},
      {"top10_share_followers", &top10_share_followers},
      {"top10_share_reposts", &top10_share_reposts},
      {"share_post", &share_post},
      {"share_repost", &share_repost},
      {"share_follow", &share_follow},
      {"max_followers", &max_followers},
      {"avg_followers", &avg_followers},
      {"max_reposts", &max_reposts},
      {"avg_reposts", &avg_reposts},
      {"n_steps", &n_steps},
      {"n_skips", &n_skips}};
  for (auto& [n, p] : table) {
    if (n == name) return p;
  }
  return nullptr;
}

namespace {

template <typename F>
void try_metric(RunSummary& s, std::optional<double> RunSummary::*field, const char* name, F&& f) {
  try {
    s.*field = f();
  } catch (const Error& e) {
    s.undefined[name] = e.what();
  }
}

}  // namespace

RunSummary summarize_state(const PlatformState& state) {
  RunSummary s;
  const auto n = state.personas.size();
  std::vector<double> followers(n), received(n), extremity(n);
  const auto counts = follower_counts(state);
  for (std::size_t i = 0; i < n; ++i) {
    followers[i] = counts[i];
    extremity[i] = state.personas[i].extremity();
  }
  std::vector<double> per_post;
  per_post.reserve(state.posts.size());
  for (const auto& p : state.posts) {
    received[index_of(p.author_id)] += p.repost_count;
    per_post.push_back(p.repost_count);
  }

  try_metric(s, &RunSummary::ei_index, "ei_index", [&] {
    const auto ei = socsim::ei_index(state.follows, state.personas);
    s.ei_dropped_edges = static_cast<double>(ei.dropped);
    return ei.value;
  });
  try_metric(s, &RunSummary::corr_partisan_followers, "corr_partisan_followers",
             [&] { return pearson(extremity, followers); });
  try_metric(s, &RunSummary::corr_partisan_reposts, "corr_partisan_reposts",
             [&] { return pearson(extremity, received); });
  try_metric(s, &RunSummary::gini_followers, "gini_followers", [&] { return gini(followers); });
  try_metric(s, &RunSummary::gini_reposts, "gini_reposts", [&] { return gini(per_post); });
  try_metric(s, &RunSummary::top10_share_followers, "top10_share_followers",
             [&] { return top_share(followers, 0.10); });
  try_metric(s, &RunSummary::top10_share_reposts, "top10_share_reposts",
             [&] { return top_share(per_post, 0.10); });
  if (n > 0) {
    s.max_followers = *std::max_element(followers.begin(), followers.end());
    s.avg_followers = std::accumulate(followers.begin(), followers.end(), 0.0) / static_cast<double>(n);
  }
  if (!per_post.empty()) {
    s.max_reposts = *std::max_element(per_post.begin(), per_post.end());
    s.avg_reposts = std::accumulate(per_post.begin(), per_post.end(), 0.0) /
                    static_cast<double>(per_post.size());
  } else {
    s.undefined["max_reposts"] = s.undefined["avg_reposts"] = "no posts";
  }
  for (const char* f : {"share_post", "share_repost", "share_follow", "n_steps", "n_skips"}) {
    s.undefined[f] = "no event log";
  }
  return s;
}

RunSummary summarize_run(std::span<const EventRecord> events, const PlatformState& state) {
  RunSummary s = summarize_state(state);
  for (const char* f : {"share_post", "share_repost", "share_follow", "n_steps", "n_skips"}) {
    s.undefined.erase(f);
  }
  long posts = 0, reposts = 0, follows = 0, skips = 0;
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::Post:
        ++posts;
        break;
      case EventKind::Repost:
        ++reposts;
        break;
      case EventKind::Skip:
        ++skips;
        break;
    }
    if (e.has_follow()) ++follows;
  }
  s.n_steps = static_cast<double>(events.size());
  s.n_skips = static_cast<double>(skips);
  const long acted = posts + reposts;
  if (acted > 0) {
    s.share_post = 100.0 * static_cast<double>(posts) / static_cast<double>(acted);
    s.share_repost = 100.0 * static_cast<double>(reposts) / static_cast<double>(acted);
    s.share_follow = 100.0 * static_cast<double>(follows) / static_cast<double>(acted);
  } else {
    s.undefined["share_post"] = s.undefined["share_repost"] = s.undefined["share_follow"] =
        "no non-skip steps";
  }
  return s;
}

std::map<std::string, FieldAggregate> aggregate_runs(std::span<const RunSummary> runs) {
  std::map<std::string, FieldAggregate> out;
  if (runs.empty()) return out;
  for (const auto& [name, unused] : runs.front().fields()) {
    std::vector<double> v;
    for (const auto& r : runs) {
      for (const auto& [n, value] : r.fields()) {
        if (n == name && value) v.push_back(*value);
      }
    }
    if (v.empty()) continue;
    FieldAggregate a;
    a.n = v.size();
    a.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() >= 2) {
      double ss = 0;
      for (double x : v) ss += (x - a.mean) * (x - a.mean);
      const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      a.se = sd / std::sqrt(static_cast<double>(v.size()));
    }
    out.emplace(std::string(name), a);
  }
  return out;
}

std::map<std::string, std::map<std::string, FieldAggregate>> aggregate_conditions(
    const std::map<std::string, std::vector<RunSummary>>& by_condition) {
  std::map<std::string, std::map<std::string, FieldAggregate>> out;
  for (const auto& [condition, runs] : by_condition) out[condition] = aggregate_runs(runs);
  return out;
}

}  // namespace socsim
