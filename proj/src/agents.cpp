#include "socsim/agents.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "socsim/errors.hpp"
#include "socsim/ingestion.hpp"

namespace socsim {

using nlohmann::json;

std::string_view to_string(ActionKind kind) {
  return kind == ActionKind::Post ? "post" : "repost";
}

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::MalformedJson:
      return "malformed_json";
    case FailureKind::UnknownAction:
      return "unknown_action";
    case FailureKind::MissingField:
      return "missing_field";
    case FailureKind::DanglingReference:
      return "dangling_reference";
    case FailureKind::IneligibleTarget:
      return "ineligible_target";
  }
  return "malformed_json";
}

namespace {

const TimelineEntry* find_entry(const Timeline& t, PostId id) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.at(i).post_id == id) return &t.at(i);
  }
  return nullptr;
}

const TimelineEntry* find_author(const Timeline& t, UserId id) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.at(i).author_id == id) return &t.at(i);
  }
  return nullptr;
}

DecisionFailure fail(FailureKind kind, std::string detail) { return {kind, std::move(detail)}; }

/// A JSON number or numeric string as a list position.
std::optional<long long> as_position(const json& v) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d)) return static_cast<long long>(d);
    return std::nullopt;
  }
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '#' || c == ' ' || c == '['  || c == ']'; }),
            s.end());
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) return out;
  }
  return std::nullopt;
}

bool absent(const json& doc, const char* key) {
  return !doc.contains(key) || doc[key].is_null() ||
         (doc[key].is_string() && doc[key].get<std::string>().empty());
}

std::string render_timeline(const AgentView& view) {
  const auto& t = view.timeline;
  if (t.empty()) return "(your timeline is empty)";
  std::ostringstream out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& e = t.at(i);
    if (i) out << '\n';
    out << '[' << i << "] @" << e.author_handle;
    if (view.visibility.show_social_stats) out << " (" << e.author_follower_count << " followers)";
    if (e.author_followed) out << " (you follow them)";
    if (e.is_repost_surfaced) out << " (reposted by @" << e.surfaced_by_handle << ')';
    out << '\n';
    if (view.visibility.show_biographies && !e.author_biography.empty()) {
      out << "    About the author: " << e.author_biography << '\n';
    }
    out << "    \"" << e.text << '"';
    if (view.visibility.show_social_stats) out << "\n    " << e.repost_count << " reposts";
    if (e.reposted_by_owner) out << "\n    (you already reposted this)";
  }
  return out.str();
}

std::string render_headlines(const std::vector<NewsItem>& headlines) {
  if (headlines.empty()) return "(no headlines)";
  std::ostringstream out;
  for (std::size_t i = 0; i < headlines.size(); ++i) {
    const auto& h = headlines[i];
    if (i) out << '\n';
    out << '[' << i << "] " << h.headline;
    if (!h.category.empty()) out << " (" << h.category << ')';
    if (!h.description.empty()) out << "\n    " << h.description;
  }
  return out.str();
}

std::string render_recent(const std::vector<std::string>& posts) {
  if (posts.empty()) return "(you have not posted yet)";
  std::ostringstream out;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (i) out << '\n';
    out << "- " << posts[i];
  }
  return out.str();
}

std::string stub_post_text(const Persona& p, const NewsItem& h) {
  if (p.partisanship < 0) {
    return "Progressive take on \"" + h.headline + "\": this is exactly why we need change.";
  }
  if (p.partisanship > 0) {
    return "Conservative take on \"" + h.headline + "\": Washington keeps getting this wrong.";
  }
  return "Thinking about \"" + h.headline + "\". Both sides have a point here.";
}

}  // namespace

std::optional<DecisionFailure> check_decision(const ActionDecision& d, const AgentView& view) {
  if (d.action == ActionKind::Post) {
    if (d.post_text.empty()) return fail(FailureKind::MissingField, "a post needs post_text");
    if (!d.chosen_headline) return fail(FailureKind::MissingField, "a post needs chosen_headline");
    const bool known = std::any_of(view.headlines.begin(), view.headlines.end(),
                                   [&](const NewsItem& n) { return n.item_id == *d.chosen_headline; });
    if (!known) return fail(FailureKind::DanglingReference, "chosen headline is not in the list");
    if (d.repost_target) return fail(FailureKind::MissingField, "a post must not name a repost_target");
  } else {
    if (!d.repost_target) return fail(FailureKind::MissingField, "a repost needs repost_target");
    if (!d.post_text.empty() || d.chosen_headline) {
      return fail(FailureKind::MissingField, "a repost must not carry post_text or chosen_headline");
    }
    const auto* entry = find_entry(view.timeline, *d.repost_target);
    if (!entry) return fail(FailureKind::DanglingReference, "repost target is not on the timeline");
    if (entry->author_id == view.user_id) {
      return fail(FailureKind::IneligibleTarget, "you cannot repost your own post");
    }
    if (entry->reposted_by_owner) {
      return fail(FailureKind::IneligibleTarget, "you already reposted that post");
    }
  }
  if (d.follow_target) {
    if (*d.follow_target == view.user_id) {
      return fail(FailureKind::IneligibleTarget, "you cannot follow yourself");
    }
    const auto* entry = find_author(view.timeline, *d.follow_target);
    if (!entry) return fail(FailureKind::DanglingReference, "follow target is not a timeline author");
    if (entry->author_followed) {
      return fail(FailureKind::IneligibleTarget, "you already follow @" + entry->author_handle);
    }
  }
  return std::nullopt;
}

ParseResult parse_decision(std::string_view raw, const AgentView& view) {
  auto doc = json::parse(raw, nullptr, false);
  if (doc.is_discarded()) {
    // Tolerate prose or code fences around a single object.
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
      doc = json::parse(raw.substr(open, close - open + 1), nullptr, false);
    }
  }
  if (doc.is_discarded() || !doc.is_object()) {
    return fail(FailureKind::MalformedJson, "the answer is not a JSON object");
  }

  ActionDecision d;
  if (!doc.contains("action") || !doc["action"].is_string()) {
    return fail(FailureKind::UnknownAction, "missing \"action\"");
  }
  auto action = doc["action"].get<std::string>();
  std::transform(action.begin(), action.end(), action.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (action == "post") {
    d.action = ActionKind::Post;
  } else if (action == "repost") {
    d.action = ActionKind::Repost;
  } else {
    return fail(FailureKind::UnknownAction, "action must be \"post\" or \"repost\", got \"" + action + "\"");
  }

  if (doc.contains("reasoning") && doc["reasoning"].is_string()) {
    d.reasoning = doc["reasoning"].get<std::string>();
  }

  if (d.action == ActionKind::Post) {
    if (absent(doc, "post_text") || !doc["post_text"].is_string()) {
      return fail(FailureKind::MissingField, "a post needs a non-empty \"post_text\"");
    }
    d.post_text = doc["post_text"].get<std::string>();
    if (absent(doc, "chosen_headline")) {
      return fail(FailureKind::MissingField, "a post needs \"chosen_headline\"");
    }
    const auto pos = as_position(doc["chosen_headline"]);
    if (!pos || *pos < 0 || static_cast<std::size_t>(*pos) >= view.headlines.size()) {
      return fail(FailureKind::DanglingReference,
                  "chosen_headline " + doc["chosen_headline"].dump() + " is not a listed headline");
    }
    d.chosen_headline = view.headlines[static_cast<std::size_t>(*pos)].item_id;
  } else {
    if (absent(doc, "repost_target")) {
      return fail(FailureKind::MissingField, "a repost needs \"repost_target\"");
    }
    const auto pos = as_position(doc["repost_target"]);
    if (!pos || *pos < 0 || static_cast<std::size_t>(*pos) >= view.timeline.size()) {
      return fail(FailureKind::DanglingReference,
                  "repost_target " + doc["repost_target"].dump() + " is not a timeline post");
    }
    d.repost_target = view.timeline.at(static_cast<std::size_t>(*pos)).post_id;
  }

  if (!absent(doc, "follow_target")) {
    const auto& f = doc["follow_target"];
    std::optional<UserId> target;
    if (f.is_string()) {
      std::string handle = f.get<std::string>();
      if (!handle.empty() && handle.front() == '@') handle.erase(0, 1);
      for (std::size_t i = 0; i < view.timeline.size() && !target; ++i) {
        if (view.timeline.at(i).author_handle == handle) target = view.timeline.at(i).author_id;
      }
      if (!target && handle == view.persona.user_id) target = view.user_id;
    }
    if (!target) {
      if (const auto pos = as_position(f);
          pos && *pos >= 0 && static_cast<std::size_t>(*pos) < view.timeline.size()) {
        target = view.timeline.at(static_cast<std::size_t>(*pos)).author_id;
      }
    }
    if (!target) {
      return fail(FailureKind::DanglingReference,
                  "follow_target " + f.dump() + " is not the author of a timeline post");
    }
    d.follow_target = target;
  }

  if (auto problem = check_decision(d, view)) return *problem;
  return d;
}

ChatRequest build_prompt(const AgentView& view, const LlmAgentSettings& settings,
                         const PromptTemplates& templates) {
  ChatRequest req;
  req.model = settings.model;
  req.temperature = settings.temperature;
  req.max_tokens = settings.max_tokens;
  req.response_format = ResponseFormat::JsonObject;
  const auto system = render(
      templates.agent_system,
      {{"persona", persona_profile(view.persona, view.visibility.show_biographies)}});
  const auto user = render(templates.agent_user, {{"recent_posts", render_recent(view.own_recent_posts)},
                                                  {"timeline", render_timeline(view)},
                                                  {"headlines", render_headlines(view.headlines)}});
  req.messages = {{Role::System, system}, {Role::User, user}};
  return req;
}

LlmDecision llm_decide(const AgentView& view, LlmClient& llm, const LlmAgentSettings& settings,
                       const PromptTemplates& templates) {
  auto req = build_prompt(view, settings, templates);
  std::string last_problem;
  int attempt = 0;
  while (attempt < settings.max_attempts) {
    ++attempt;
    ChatResponse resp;
    try {
      resp = llm.chat(req);
    } catch (const CacheMissError&) {
      throw;
    } catch (const Error& e) {
      return {Skip{std::string("llm transport: ") + e.what()}, attempt};
    }
    auto parsed = parse_decision(resp.content, view);
    if (auto* d = std::get_if<ActionDecision>(&parsed)) return {std::move(*d), attempt};
    const auto& failure = std::get<DecisionFailure>(parsed);
    last_problem = std::string(to_string(failure.kind)) + ": " + failure.detail;
    req.messages.push_back({Role::Assistant, resp.content});
    req.messages.push_back({Role::User, render(templates.repair, {{"problem", failure.detail}})});
  }
  return {Skip{"no valid decision after " + std::to_string(attempt) + " attempts (" +
               last_problem + ")"},
          attempt};
}

DecisionOutcome LlmBackend::decide(const AgentView& view, Rng&) {
  return llm_decide(view, llm_, settings_, templates_).outcome;
}

std::vector<double> stub_weights(const AgentView& view, const StubParams& params) {
  std::vector<double> w(view.timeline.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto& e = view.timeline.at(i);
    const bool co_partisan = party_for(e.author_partisanship) == view.persona.party;
    w[i] = std::pow(1.0 + e.repost_count, params.engagement_bias) *
           (1.0 + params.homophily * (co_partisan ? 1.0 : 0.0));
  }
  return w;
}

ActionDecision stub_decide(const AgentView& view, const StubParams& params, Rng& rng) {
  const auto weights = stub_weights(view, params);
  std::vector<double> repost_weights = weights;
  double total = 0;
  for (std::size_t i = 0; i < repost_weights.size(); ++i) {
    const auto& e = view.timeline.at(i);
    if (e.reposted_by_owner || e.author_id == view.user_id) repost_weights[i] = 0;
    total += repost_weights[i];
  }

  ActionDecision d;
  const bool wants_post = rng.bernoulli(params.post_rate);
  if (wants_post || total <= 0) {
    d.action = ActionKind::Post;
    const auto& h = view.headlines.at(rng.below(view.headlines.size()));
    d.chosen_headline = h.item_id;
    d.post_text = stub_post_text(view.persona, h);
    d.reasoning = "scripted: post";
  } else {
    d.action = ActionKind::Repost;
    double u = rng.uniform() * total;
    std::size_t pick = repost_weights.size();
    for (std::size_t i = 0; i < repost_weights.size(); ++i) {
      if (repost_weights[i] <= 0) continue;
      pick = i;
      if (u < repost_weights[i]) break;
      u -= repost_weights[i];
    }
    d.repost_target = view.timeline.at(pick).post_id;
    d.reasoning = "scripted: repost";
  }

  // The follow candidate is the heaviest entry (first on ties), whatever the
  // action was.
  if (rng.bernoulli(params.follow_rate) && !weights.empty()) {
    const auto heaviest =
        static_cast<std::size_t>(std::max_element(weights.begin(), weights.end()) - weights.begin());
    const auto& e = view.timeline.at(heaviest);
    if (!e.author_followed && e.author_id != view.user_id) d.follow_target = e.author_id;
  }
  return d;
}

}  // namespace socsim
