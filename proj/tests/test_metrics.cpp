#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "oracles.hpp"
#include "socsim/errors.hpp"
#include "socsim/engine.hpp"
#include "socsim/metrics.hpp"
#include "support.hpp"

using namespace socsim;
using socsim::test::add_follow;
using socsim::test::add_post;
using socsim::test::add_repost;
using socsim::test::make_state;

namespace {

std::vector<Persona> personas_with(const std::vector<int>& partisanship) {
  std::vector<Persona> out;
  for (std::size_t i = 0; i < partisanship.size(); ++i) out.push_back(make_persona("u" + std::to_string(i), partisanship[i]));
  return out;
}

FollowEdge edge(std::size_t a, std::size_t b) { return FollowEdge{user_at(a), user_at(b), 0}; }

std::vector<double> random_values(std::mt19937_64& gen, std::size_t n) {
  std::vector<double> v(n);
  std::uniform_real_distribution<double> uni(0.0, 100.0);
  std::geometric_distribution<int> geo(0.3);
  const bool integer = gen() % 2;
  for (auto& x : v) x = integer ? static_cast<double>(geo(gen)) : uni(gen);
  return v;
}

}  // namespace

TEST_CASE("ei_index") {
  const auto people = personas_with({-2, -1, 1, 3, 0});
  SUBCASE("all within party") {
    const std::vector<FollowEdge> f{edge(0, 1), edge(1, 0), edge(2, 3)};
    CHECK(ei_index(f, people).value == -1.0);
  }
  SUBCASE("three external, one internal") {
    const std::vector<FollowEdge> f{edge(0, 2), edge(1, 3), edge(3, 0), edge(0, 1)};
    const auto r = ei_index(f, people);
    CHECK(r.value == doctest::Approx(0.5));
    CHECK(r.external == 3);
    CHECK(r.internal == 1);
  }
  SUBCASE("balanced") {
    const std::vector<FollowEdge> f{edge(0, 2), edge(0, 1)};
    CHECK(ei_index(f, people).value == 0.0);
  }
  SUBCASE("non-partisan endpoints are dropped") {
    const std::vector<FollowEdge> f{edge(0, 4), edge(4, 2), edge(0, 1)};
    const auto r = ei_index(f, people);
    CHECK(r.dropped == 2);
    CHECK(r.value == -1.0);
    const std::vector<FollowEdge> only{edge(0, 4)};
    CHECK_THROWS_AS(ei_index(only, people), UndefinedMetricError);
    CHECK_THROWS_AS(ei_index(std::vector<FollowEdge>{}, people), UndefinedMetricError);
  }
  SUBCASE("antisymmetric under swapping internal and external") {
    // Flipping one endpoint's party turns every internal edge external and back.
    std::mt19937_64 gen(1);
    for (int t = 0; t < 200; ++t) {
      std::vector<int> parts(8);
      for (auto& p : parts) p = (gen() % 2) ? 1 + gen() % 3 : -1 - static_cast<int>(gen() % 3);
      std::vector<FollowEdge> f;
      for (int k = 0; k < 12; ++k) {
        // Edges only from users 0-3 to users 4-7.
        f.push_back(edge(gen() % 4, 4 + gen() % 4));
      }
      auto flipped = parts;
      for (std::size_t i = 4; i < 8; ++i) flipped[i] = -flipped[i];
      CHECK(ei_index(f, personas_with(parts)).value == doctest::Approx(-ei_index(f, personas_with(flipped)).value));
    }
  }
}

TEST_CASE("gini") {
  CHECK(gini(std::vector<double>{1, 1, 1, 1}) == 0.0);
  CHECK(gini(std::vector<double>{0, 0, 0, 1}) == doctest::Approx(0.75));
  CHECK(gini(std::vector<double>{0, 0, 0}) == 0.0);
  CHECK_THROWS_AS(gini(std::vector<double>{}), ArgumentError);
  CHECK_THROWS_AS(gini(std::vector<double>{1, -1}), ArgumentError);

  std::mt19937_64 gen(2);
  for (int t = 0; t < 300; ++t) {
    const auto x = random_values(gen, 1 + gen() % 500);
    const double g = gini(x);
    CHECK(std::fabs(g - oracle::gini(x)) <= 1e-9);
    CHECK((g >= 0.0 && g <= 1.0));
    // Scale invariance.
    auto scaled = x;
    const double c = 0.01 + (gen() % 1000) / 10.0;
    for (auto& v : scaled) v *= c;
    CHECK(std::fabs(gini(scaled) - g) <= 1e-9);
    // Duplicating the population leaves it unchanged.
    auto doubled = x;
    doubled.insert(doubled.end(), x.begin(), x.end());
    CHECK(std::fabs(gini(doubled) - g) <= 1e-9);
  }
}

TEST_CASE("pearson") {
  const std::vector<double> x{0, 1, 2, 3};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> y2{1, 0, 2, 1};
  CHECK(std::fabs(pearson(x, y2) - oracle::pearson(x, y2)) <= 1e-12);
  CHECK(pearson(x, y2) == doctest::Approx(0.31622776601683794));  // 1 / sqrt(10)

  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 1, 1, 1}), UndefinedMetricError);
  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), ArgumentError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{2}), ArgumentError);

  std::mt19937_64 gen(3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + gen() % 300;
    const auto a = random_values(gen, n);
    const auto b = random_values(gen, n);
    try {
      CHECK(std::fabs(pearson(a, b) - oracle::pearson(a, b)) <= 1e-12);
    } catch (const UndefinedMetricError&) {
      // A constant side; covered above.
    }
  }
}

TEST_CASE("top_share") {
  CHECK(top_share(std::vector<double>{1, 1, 1, 1}, 0.25) == doctest::Approx(0.25));
  CHECK(top_share(std::vector<double>{97, 1, 1, 1}, 0.25) == doctest::Approx(0.97));
  CHECK(top_share(std::vector<double>{5, 4, 3, 2, 1}, 0.4) == doctest::Approx(9.0 / 15.0));
  CHECK(top_share(std::vector<double>{5, 4, 3, 2, 1}, 1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(top_share(std::vector<double>{0, 0}, 0.5), UndefinedMetricError);
  CHECK_THROWS_AS(top_share(std::vector<double>{}, 0.5), ArgumentError);
  CHECK_THROWS_AS(top_share(std::vector<double>{1}, 0.0), ArgumentError);
  CHECK_THROWS_AS(top_share(std::vector<double>{1}, 1.5), ArgumentError);

  std::mt19937_64 gen(4);
  for (int t = 0; t < 300; ++t) {
    auto x = random_values(gen, 1 + gen() % 200);
    x.push_back(1.0);
    const double f = 0.01 + (gen() % 100) / 100.0;
    CHECK(std::fabs(top_share(x, std::min(f, 1.0)) - oracle::top_share(x, std::min(f, 1.0))) <= 1e-12);
  }
}

TEST_CASE("label_propagation") {
  SUBCASE("two triangles joined by one edge") {
    const std::vector<FollowEdge> f{edge(0, 1), edge(1, 2), edge(2, 0), edge(3, 4),
                                    edge(4, 5), edge(5, 3), edge(2, 3)};
    const auto labels = label_propagation(6, f, 7);
    CHECK(labels == std::vector<int>{0, 0, 0, 1, 1, 1});

    // The exhaustive best-modularity partition of this graph is the same.
    std::vector<std::vector<int>> adj(6, std::vector<int>(6, 0));
    for (const auto& e : f) adj[index_of(e.follower_id)][index_of(e.followee_id)] =
                            adj[index_of(e.followee_id)][index_of(e.follower_id)] = 1;
    double best = -1;
    std::vector<int> best_partition;
    oracle::for_each_partition(6, [&](const std::vector<int>& p) {
      const double q = oracle::modularity(adj, p);
      if (q > best + 1e-12) {
        best = q;
        best_partition = p;
      }
    });
    CHECK(oracle::same_partition(best_partition, labels));
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      CHECK(oracle::same_partition(label_propagation(6, f, seed), labels));
    }
  }

  SUBCASE("edgeless graph") { CHECK(label_propagation(5, std::vector<FollowEdge>{}, 1) == std::vector<int>{0, 1, 2, 3, 4}); }

  SUBCASE("complete graph") {
    std::vector<FollowEdge> f;
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 7; ++j)
        if (i != j) f.push_back(edge(i, j));
    CHECK(label_propagation(7, f, 3) == std::vector<int>(7, 0));
  }

  SUBCASE("planted two-clique graphs are recovered") {
    std::mt19937_64 gen(5);
    for (int t = 0; t < 100; ++t) {
      const auto g = oracle::two_cliques(6 + gen() % 35, gen);
      CHECK(oracle::same_partition(label_propagation(g.n, g.follows, gen()), g.block));
    }
  }

  SUBCASE("deterministic and compact labels") {
    std::mt19937_64 gen(6);
    for (int t = 0; t < 100; ++t) {
      const std::size_t n = 1 + gen() % 30;
      std::vector<FollowEdge> f;
      for (int k = 0; k < 40; ++k) {
        const auto a = gen() % n, b = gen() % n;
        if (a != b) f.push_back(edge(a, b));
      }
      const auto seed = gen();
      const auto labels = label_propagation(n, f, seed);
      CHECK(labels == label_propagation(n, f, seed));
      REQUIRE(labels.size() == n);
      std::set<int> used(labels.begin(), labels.end());
      CHECK(*used.rbegin() == static_cast<int>(used.size()) - 1);
      // Numbered in order of first appearance.
      int next = 0;
      for (int l : labels) {
        CHECK(l <= next);
        if (l == next) ++next;
      }
    }
  }
}

TEST_CASE("summaries") {
  SUBCASE("action shares from a log") {
    auto s = make_state({-1, 1, 2, -3});
    std::vector<EventRecord> events;
    auto push = [&](EventRecord e) {
      apply_event(s, e);
      events.push_back(e);
    };
    push({0, user_at(0), EventKind::Post, post_at(0), "a"});
    push({1, user_at(1), EventKind::Post, post_at(1), "b"});
    EventRecord r{2, user_at(2), EventKind::Repost, post_at(0)};
    r.follow_target = user_at(0);
    push(r);
    push({3, user_at(3), EventKind::Repost, post_at(1)});
    EventRecord skip{4, user_at(3), EventKind::Skip};
    skip.skip_cause = "nothing to do";
    push(skip);
    const auto sum = summarize_run(events, s);
    CHECK(*sum.share_post == doctest::Approx(50.0));
    CHECK(*sum.share_repost == doctest::Approx(50.0));
    CHECK(*sum.share_follow == doctest::Approx(25.0));
    CHECK(*sum.n_steps == 5);
    CHECK(*sum.n_skips == 1);
    CHECK(*sum.max_reposts == 1);
    CHECK(*sum.avg_reposts == doctest::Approx(1.0));
  }

  SUBCASE("follower statistics") {
    auto s = make_state({-1, 1, 2, -3});
    add_follow(s, 1, 0, 0);
    add_follow(s, 2, 0, 0);
    add_follow(s, 3, 0, 0);
    add_follow(s, 0, 1, 0);
    const auto sum = summarize_state(s);
    CHECK(*sum.avg_followers == doctest::Approx(1.0));
    CHECK(*sum.max_followers == 3);
    CHECK_FALSE(sum.share_post.has_value());
    CHECK(sum.undefined.count("share_post"));
    CHECK(*sum.gini_followers == doctest::Approx(oracle::gini({3, 1, 0, 0})));
    CHECK(*sum.ei_index == doctest::Approx(oracle::ei(s.follows, {-1, 1, 2, -3}).value()));
  }

  SUBCASE("undefined metrics are absent with a cause") {
    auto s = make_state({1, 1, 1});
    const auto sum = summarize_state(s);
    CHECK_FALSE(sum.ei_index.has_value());
    CHECK_FALSE(sum.corr_partisan_followers.has_value());
    CHECK(sum.undefined.count("ei_index"));
    CHECK(*sum.gini_followers == 0.0);
  }

  SUBCASE("fields are addressable by name") {
    RunSummary s;
    REQUIRE(s.field("gini_reposts") != nullptr);
    *s.field("gini_reposts") = 0.25;
    CHECK(*s.gini_reposts == 0.25);
    CHECK(s.field("nonsense") == nullptr);
    CHECK(s.fields().size() == 17);
  }
}

TEST_CASE("aggregation") {
  auto with = [](double v) {
    RunSummary s;
    s.ei_index = v;
    return s;
  };
  {
    const std::vector<RunSummary> runs{with(-0.8), with(-0.8), with(-0.8)};
    const auto a = aggregate_runs(runs).at("ei_index");
    CHECK(a.mean == doctest::Approx(-0.8));
    CHECK(*a.se == doctest::Approx(0.0));
    CHECK(a.n == 3);
  }
  {
    const std::vector<RunSummary> runs{with(0), with(1)};
    const auto a = aggregate_runs(runs).at("ei_index");
    CHECK(a.mean == doctest::Approx(0.5));
    CHECK(*a.se == doctest::Approx(oracle::standard_error({0, 1})));
    CHECK(*a.se == doctest::Approx(0.5));
  }
  {
    const std::vector<RunSummary> runs{with(0.3)};
    const auto agg = aggregate_runs(runs);
    CHECK_FALSE(agg.at("ei_index").se.has_value());
    CHECK_FALSE(agg.count("gini_followers"));
  }
  const auto by = aggregate_conditions({{"base", {with(1), with(3)}}, {"chronological", {with(2)}}});
  CHECK(by.at("base").at("ei_index").mean == doctest::Approx(2));
  CHECK(by.at("chronological").at("ei_index").n == 1);
}

TEST_CASE("summary of a stub run matches a recomputation from the raw log") {
  test::TempDir dir;
  RunConfig config;
  config.n_users = 40;
  config.n_steps = 600;
  config.seed = 12;
  config.snapshot_every = 0;
  const auto result = run(config, dir.path());

  // Everything below reads the raw JSON lines directly.
  std::ifstream in(result.events_path);
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line)["header"];
  std::vector<int> partisanship;
  for (const auto& p : header["personas"]) partisanship.push_back(p["partisanship"].get<int>());
  const std::size_t n = partisanship.size();
  std::vector<double> followers(n, 0), user_reposts(n, 0);
  std::vector<double> post_reposts;
  std::vector<std::size_t> post_author;
  std::vector<FollowEdge> follows;
  long posts = 0, reposts = 0, with_follow = 0, skips = 0, steps = 0;
  while (std::getline(in, line)) {
    const auto e = nlohmann::json::parse(line);
    ++steps;
    const auto kind = e["kind"].get<std::string>();
    if (kind == "skip") {
      ++skips;
      continue;
    }
    const std::size_t user = e["user_id"].get<std::size_t>();
    if (kind == "post") {
      ++posts;
      post_reposts.push_back(0);
      post_author.push_back(user);
    } else {
      ++reposts;
      const std::size_t p = e["post_id"].get<std::size_t>();
      post_reposts[p] += 1;
      user_reposts[post_author[p]] += 1;
    }
    if (e.contains("follow_target") && !e["follow_target"].is_null()) {
      ++with_follow;
      const std::size_t target = e["follow_target"].get<std::size_t>();
      followers[target] += 1;
      follows.push_back(FollowEdge{user_at(user), user_at(target), 0});
    }
  }
  const auto& s = result.summary;
  const double actions = static_cast<double>(posts + reposts);
  CHECK(*s.n_steps == steps);
  CHECK(*s.n_skips == skips);
  CHECK(*s.share_post == doctest::Approx(100.0 * posts / actions));
  CHECK(*s.share_repost == doctest::Approx(100.0 * reposts / actions));
  CHECK(*s.share_follow == doctest::Approx(100.0 * with_follow / actions));
  CHECK(*s.gini_followers == doctest::Approx(oracle::gini(followers)).epsilon(1e-12));
  CHECK(*s.gini_reposts == doctest::Approx(oracle::gini(post_reposts)).epsilon(1e-12));
  CHECK(*s.top10_share_followers == doctest::Approx(oracle::top_share(followers, 0.1)));
  CHECK(*s.top10_share_reposts == doctest::Approx(oracle::top_share(post_reposts, 0.1)));
  const auto ei = oracle::ei(follows, partisanship);
  CHECK(*s.ei_index == doctest::Approx(ei.value()));
  CHECK(*s.ei_dropped_edges == ei.dropped);
  double max_f = 0, sum_f = 0, max_r = 0, sum_r = 0;
  for (double f : followers) {
    max_f = std::max(max_f, f);
    sum_f += f;
  }
  for (double r : post_reposts) {
    max_r = std::max(max_r, r);
    sum_r += r;
  }
  CHECK(*s.max_followers == max_f);
  CHECK(*s.avg_followers == doctest::Approx(sum_f / n));
  CHECK(*s.max_reposts == max_r);
  CHECK(*s.avg_reposts == doctest::Approx(sum_r / post_reposts.size()));
  std::vector<double> extremity;
  for (int p : partisanship) extremity.push_back(std::abs(p));
  CHECK(*s.corr_partisan_followers == doctest::Approx(oracle::pearson(extremity, followers)).epsilon(1e-12));
  CHECK(*s.corr_partisan_reposts == doctest::Approx(oracle::pearson(extremity, user_reposts)).epsilon(1e-12));
}
