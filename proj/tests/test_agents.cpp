#include <doctest.h>

#include <cmath>
#include <regex>

#include "socsim/agents.hpp"
#include "socsim/errors.hpp"
#include "support.hpp"

using namespace socsim;
using socsim::test::random_view;
using socsim::test::TempDir;

namespace {

TimelineEntry entry(std::size_t post, std::size_t author, int partisanship, int reposts,
                    bool followed = false) {
  TimelineEntry e;
  e.post_id = post_at(post);
  e.author_id = user_at(author);
  e.author_handle = "user" + std::to_string(author);
  e.author_partisanship = partisanship;
  e.author_followed = followed;
  e.repost_count = reposts;
  e.text = "text of post " + std::to_string(post);
  return e;
}

AgentView simple_view() {
  AgentView v;
  v.user_id = user_at(0);
  v.persona = make_persona("user0", 2);
  v.timeline.owner_id = v.user_id;
  v.timeline.followed_slots = {entry(4, 1, 3, 2, true)};
  v.timeline.discovery_slots = {entry(7, 2, -3, 5), entry(9, 3, 1, 0)};
  v.headlines = {NewsItem{11, "First headline", "POLITICS", ""},
                 NewsItem{12, "Second headline", "SCIENCE", ""}};
  return v;
}

const std::regex kCountPhrase(R"(\d+\s*(reposts?|followers?))", std::regex::icase);

std::string prompt_text(const ChatRequest& req) {
  std::string all;
  for (const auto& m : req.messages) all += m.content + "\n";
  return all;
}

}  // namespace

TEST_CASE("parse_decision") {
  const auto view = simple_view();

  SUBCASE("post happy path") {
    const auto r = parse_decision(
        R"({"action":"post","post_text":"Big news today.","chosen_headline":0,"repost_target":null,"follow_target":null,"reasoning":"why not"})",
        view);
    const auto& d = std::get<ActionDecision>(r);
    CHECK(d.action == ActionKind::Post);
    CHECK(d.post_text == "Big news today.");
    CHECK(d.chosen_headline == 11);
    CHECK_FALSE(d.follow_target.has_value());
    CHECK(d.reasoning == "why not");
  }

  SUBCASE("repost with follow by handle") {
    const auto r = parse_decision(
        R"({"action":"repost","post_text":null,"chosen_headline":null,"repost_target":2,"follow_target":"@user3"})",
        view);
    const auto& d = std::get<ActionDecision>(r);
    CHECK(d.action == ActionKind::Repost);
    CHECK(d.repost_target == post_at(9));
    CHECK(d.follow_target == user_at(3));
  }

  SUBCASE("dangling repost target") {
    const auto r = parse_decision(R"({"action":"repost","repost_target":"not_in_timeline"})", view);
    CHECK(std::get<DecisionFailure>(r).kind == FailureKind::DanglingReference);
    const auto r2 = parse_decision(R"({"action":"repost","repost_target":3})", view);
    CHECK(std::get<DecisionFailure>(r2).kind == FailureKind::DanglingReference);
  }

  SUBCASE("non-JSON answer") {
    const auto r = parse_decision("I think I'll repost #2", view);
    CHECK(std::get<DecisionFailure>(r).kind == FailureKind::MalformedJson);
  }

  SUBCASE("unknown action and missing fields") {
    CHECK(std::get<DecisionFailure>(parse_decision(R"({"action":"like"})", view)).kind ==
          FailureKind::UnknownAction);
    CHECK(std::get<DecisionFailure>(parse_decision(R"({"action":"post","chosen_headline":0})", view)).kind ==
          FailureKind::MissingField);
    CHECK(std::get<DecisionFailure>(parse_decision(R"({"action":"repost"})", view)).kind ==
          FailureKind::MissingField);
  }

  SUBCASE("ineligible follow") {
    const auto r = parse_decision(
        R"({"action":"post","post_text":"x","chosen_headline":1,"follow_target":"@user1"})", view);
    CHECK(std::get<DecisionFailure>(r).kind == FailureKind::IneligibleTarget);
  }
}

TEST_CASE("check_decision enforces the conditional fields") {
  const auto view = simple_view();
  ActionDecision post{ActionKind::Post, "hello", 11, std::nullopt, std::nullopt, ""};
  CHECK_FALSE(check_decision(post, view).has_value());

  auto bad = post;
  bad.repost_target = post_at(4);
  CHECK(check_decision(bad, view).has_value());
  bad = post;
  bad.chosen_headline = 99;
  CHECK(check_decision(bad, view)->kind == FailureKind::DanglingReference);
  bad = post;
  bad.follow_target = user_at(0);
  CHECK(check_decision(bad, view)->kind == FailureKind::IneligibleTarget);

  ActionDecision repost{ActionKind::Repost, "", std::nullopt, post_at(7), user_at(2), ""};
  CHECK_FALSE(check_decision(repost, view).has_value());
  auto reposted = view;
  reposted.timeline.discovery_slots[0].reposted_by_owner = true;
  CHECK(check_decision(repost, reposted)->kind == FailureKind::IneligibleTarget);
}

TEST_CASE("build_prompt") {
  Rng rng(17);

  SUBCASE("pure in the view") {
    for (int i = 0; i < 50; ++i) {
      const auto v = random_view(rng);
      const auto a = build_prompt(v);
      const auto b = build_prompt(v);
      CHECK(a == b);
      CHECK(wire_request(a).dump() == wire_request(b).dump());
      CHECK(a.response_format == ResponseFormat::JsonObject);
      CHECK(a.temperature == 1.0);
    }
  }

  SUBCASE("social statistics shown by default") {
    auto v = simple_view();
    const auto text = prompt_text(build_prompt(v));
    CHECK(std::regex_search(text, kCountPhrase));
  }

  SUBCASE("hidden social statistics leave no counts") {
    for (int i = 0; i < 100; ++i) {
      const auto v = random_view(rng, {.show_social_stats = false, .show_biographies = true});
      const auto text = prompt_text(build_prompt(v));
      CHECK_FALSE(std::regex_search(text, kCountPhrase));
      for (std::size_t k = 0; k < v.timeline.size(); ++k) {
        CHECK(text.find(v.timeline.at(k).author_biography) != std::string::npos);
      }
    }
  }

  SUBCASE("hidden biographies leave no biography text") {
    for (int i = 0; i < 100; ++i) {
      const auto v = random_view(rng, {.show_social_stats = true, .show_biographies = false});
      const auto text = prompt_text(build_prompt(v));
      CHECK(text.find(v.persona.biography) == std::string::npos);
      CHECK(text.find("SELFBIO") == std::string::npos);
      CHECK(text.find("AUTHORBIO") == std::string::npos);
    }
  }

  SUBCASE("numbering matches the timeline order") {
    const auto v = simple_view();
    const auto entries = test::prompt_timeline(build_prompt(v).messages[1].content);
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].handle == "user1");
    CHECK(entries[0].followed);
    CHECK(entries[2].number == 2);
    CHECK(entries[2].handle == "user3");
  }
}

TEST_CASE("stub weights and decisions") {
  SUBCASE("co-partisan weight doubles with h=1") {
    AgentView v = simple_view();
    v.timeline.followed_slots.clear();
    v.timeline.discovery_slots = {entry(1, 1, 3, 0), entry(2, 2, -3, 0)};
    const auto w = stub_weights(v, {.homophily = 1.0, .engagement_bias = 1.0});
    REQUIRE(w.size() == 2);
    CHECK(w[0] == doctest::Approx(2.0));
    CHECK(w[1] == doctest::Approx(1.0));
  }

  SUBCASE("engagement bias") {
    AgentView v = simple_view();
    v.timeline.followed_slots.clear();
    v.timeline.discovery_slots = {entry(1, 1, -1, 3), entry(2, 2, -1, 0)};
    const auto w = stub_weights(v, {.homophily = 0.0, .engagement_bias = 2.0});
    CHECK(w[0] == doctest::Approx(16.0));
    CHECK(w[1] == doctest::Approx(1.0));
  }

  SUBCASE("empty timeline posts") {
    AgentView v = simple_view();
    v.timeline.followed_slots.clear();
    v.timeline.discovery_slots.clear();
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
      const auto d = stub_decide(v, {.post_rate = 0.0}, rng);
      CHECK(d.action == ActionKind::Post);
      CHECK_FALSE(check_decision(d, v).has_value());
    }
  }

  SUBCASE("h=0, b=0 reposts uniformly") {
    AgentView v = simple_view();
    v.persona = make_persona("user0", 2);
    v.timeline.followed_slots = {entry(1, 1, 3, 40, true), entry(2, 2, -3, 0, true)};
    v.timeline.discovery_slots = {entry(3, 3, 2, 7), entry(4, 4, -1, 1)};
    const StubParams params{.homophily = 0.0, .engagement_bias = 0.0, .follow_rate = 0.0, .post_rate = 0.0};
    Rng rng(2024);
    const int draws = 10000;
    std::map<PostId, int> hits;
    for (int i = 0; i < draws; ++i) {
      const auto d = stub_decide(v, params, rng);
      REQUIRE(d.action == ActionKind::Repost);
      ++hits[*d.repost_target];
    }
    const double p = 0.25, sigma = std::sqrt(draws * p * (1 - p));
    REQUIRE(hits.size() == 4);
    for (const auto& [id, h] : hits) CHECK(std::fabs(h - draws * p) <= 3 * sigma);
  }

  SUBCASE("repost frequencies follow the weights") {
    AgentView v = simple_view();
    v.persona = make_persona("user0", 2);
    v.timeline.followed_slots.clear();
    v.timeline.discovery_slots = {entry(1, 1, 3, 0), entry(2, 2, -3, 0), entry(3, 3, 1, 2)};
    const StubParams params{.homophily = 0.9, .engagement_bias = 1.0, .follow_rate = 0.0, .post_rate = 0.0};
    const auto w = stub_weights(v, params);
    const double total = w[0] + w[1] + w[2];
    Rng rng(9);
    const int draws = 20000;
    std::vector<int> hits(3, 0);
    for (int i = 0; i < draws; ++i) {
      const auto d = stub_decide(v, params, rng);
      ++hits[index_of(*d.repost_target) - 1];
    }
    for (std::size_t k = 0; k < 3; ++k) {
      const double p = w[k] / total;
      CHECK(std::fabs(hits[k] - draws * p) <= 3 * std::sqrt(draws * p * (1 - p)));
    }
  }

  SUBCASE("every stub output is valid for its view") {
    Rng views(5), rng(6);
    for (int i = 0; i < 2000; ++i) {
      const auto v = random_view(views);
      const StubParams params{.homophily = views.uniform(), .engagement_bias = 2 * views.uniform(),
                              .follow_rate = views.uniform(), .post_rate = views.uniform()};
      const auto d = stub_decide(v, params, rng);
      const auto problem = check_decision(d, v);
      CHECK_MESSAGE(!problem.has_value(), (problem ? problem->detail : ""));
      if (d.follow_target) CHECK(*d.follow_target != v.user_id);
    }
  }
}

TEST_CASE("llm_decide with recorded responses") {
  TempDir dir;
  const auto view = simple_view();
  const LlmAgentSettings settings;
  const std::string valid =
      R"({"action":"repost","post_text":null,"chosen_headline":null,"repost_target":1,"follow_target":"@user2","reasoning":"agree"})";

  // Records a script into a cache, then replays it with no transport.
  auto record_then_replay = [&](std::vector<std::string> script) {
    auto transport = std::make_shared<test::ScriptedTransport>([script](const HttpRequest&, std::size_t call) {
      return HttpResponse{200, test::completion_body(script.at(call))};
    });
    {
      LlmClient recorder({.mode = CacheMode::Record, .cache_dir = dir / "c"}, transport);
      llm_decide(view, recorder, settings);
    }
    auto failing = std::make_shared<test::FailingTransport>();
    LlmClient replay({.mode = CacheMode::Replay, .cache_dir = dir / "c"}, failing);
    auto result = llm_decide(view, replay, settings);
    CHECK(failing->uses == 0);
    CHECK(replay.usage_report().requests == result.attempts);
    return std::pair{result, transport->requests()};
  };

  SUBCASE("valid first answer") {
    const auto [r, sent] = record_then_replay({valid});
    CHECK(r.attempts == 1);
    const auto& d = std::get<ActionDecision>(r.outcome);
    CHECK(d.repost_target == post_at(7));
    CHECK(d.follow_target == user_at(2));
    CHECK(sent.size() == 1);
  }

  SUBCASE("malformed then valid") {
    const auto [r, sent] = record_then_replay({"I think I'll repost #2", valid});
    CHECK(r.attempts == 2);
    CHECK(std::holds_alternative<ActionDecision>(r.outcome));
    REQUIRE(sent.size() == 2);
    const auto repair = nlohmann::json::parse(sent[1].body);
    REQUIRE(repair["messages"].size() == 4);
    CHECK(repair["messages"][2]["role"] == "assistant");
    CHECK(repair["messages"][2]["content"] == "I think I'll repost #2");
    CHECK(repair["messages"][3]["role"] == "user");
  }

  SUBCASE("three malformed answers skip") {
    const auto [r, sent] = record_then_replay({"nope", "{\"action\":\"dance\"}", "[]"});
    CHECK(r.attempts == 3);
    CHECK(std::holds_alternative<Skip>(r.outcome));
    CHECK(sent.size() == 3);
  }

  SUBCASE("transport failure is a skip, cache miss propagates") {
    LlmClient live({.mode = CacheMode::Live, .cache_dir = dir / "c", .retry = {.max_retries = 0}},
                   std::make_shared<test::ScriptedTransport>(
                       [](const HttpRequest&, std::size_t) { return HttpResponse{500, ""}; }),
                   [](std::chrono::milliseconds) {});
    CHECK(std::holds_alternative<Skip>(llm_decide(view, live, settings).outcome));

    LlmClient replay({.mode = CacheMode::Replay, .cache_dir = dir / "empty"}, nullptr);
    CHECK_THROWS_AS(llm_decide(view, replay, settings), CacheMissError);
  }
}

TEST_CASE("llm backend outputs are valid for their views") {
  TempDir dir;
  std::size_t counter = 0;
  auto transport = std::make_shared<test::ScriptedTransport>([&](const HttpRequest& r, std::size_t) {
    return HttpResponse{200, test::completion_body(test::scripted_agent_answer(nlohmann::json::parse(r.body), counter++, {3, 10}))};
  });
  LlmClient llm({.mode = CacheMode::Live, .cache_dir = dir / "c"}, transport);
  LlmBackend backend(llm, {});
  Rng views(8), rng(0);
  int decisions = 0;
  for (int i = 0; i < 200; ++i) {
    const auto v = random_view(views);
    const auto out = backend.decide(v, rng);
    if (const auto* d = std::get_if<ActionDecision>(&out)) {
      ++decisions;
      CHECK_FALSE(check_decision(*d, v).has_value());
    }
  }
  CHECK(decisions == 200);
}
