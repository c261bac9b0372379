#include "socsim/engine.hpp"

#include <algorithm>
#include <fstream>

#include "socsim/bridging.hpp"
#include "socsim/errors.hpp"
#include "socsim/hash.hpp"

namespace socsim {

using nlohmann::json;

std::vector<double> engagement_weights(const PlatformState& state, std::span<const PostId> candidates) {
  if (candidates.empty()) throw ArgumentError("engagement_weights: no candidates");
  std::vector<double> w;
  w.reserve(candidates.size());
  for (const auto id : candidates) w.push_back(1.0 + state.posts.at(index_of(id)).repost_count);
  return w;
}

namespace {

TimelineEntry make_entry(const PlatformState& state, PostId id, const std::vector<char>& followed,
                         const std::vector<int>& followers, const std::vector<char>& reposted,
                         std::optional<UserId> surfaced_by) {
  const auto& post = state.posts[index_of(id)];
  const auto& author = state.personas[index_of(post.author_id)];
  TimelineEntry e;
  e.post_id = id;
  e.author_id = post.author_id;
  e.author_handle = author.user_id;
  e.author_biography = author.biography;
  e.author_partisanship = author.partisanship;
  e.author_follower_count = followers[index_of(post.author_id)];
  e.author_followed = followed[index_of(post.author_id)] != 0;
  e.repost_count = post.repost_count;
  e.text = post.text;
  e.reposted_by_owner = reposted[index_of(id)] != 0;
  if (surfaced_by) {
    e.is_repost_surfaced = true;
    e.surfaced_by = surfaced_by;
    e.surfaced_by_handle = state.personas[index_of(*surfaced_by)].user_id;
  }
  return e;
}

}  // namespace

Timeline build_timeline(const PlatformState& state, UserId user, FeedPolicy& policy, Rng& rng,
                        const TimelineOptions& options) {
  Timeline t;
  t.owner_id = user;
  const auto n = state.personas.size();
  std::vector<char> followed(n, 0);
  for (const auto& f : state.follows) {
    if (f.follower_id == user) followed[index_of(f.followee_id)] = 1;
  }
  std::vector<char> reposted(state.posts.size(), 0);
  for (const auto& r : state.reposts) {
    if (r.reposter_id == user) reposted[index_of(r.post_id)] = 1;
  }
  const auto followers = follower_counts(state);

  struct Activity {
    int step = -1;
    std::optional<UserId> reposter;
  };
  std::vector<Activity> latest(state.posts.size());
  for (const auto& p : state.posts) {
    if (p.author_id != user && followed[index_of(p.author_id)]) {
      latest[index_of(p.post_id)] = {p.created_step, std::nullopt};
    }
  }
  for (const auto& r : state.reposts) {
    const auto& p = state.posts[index_of(r.post_id)];
    if (!followed[index_of(r.reposter_id)] || p.author_id == user) continue;
    auto& a = latest[index_of(r.post_id)];
    if (r.step > a.step) a = {r.step, r.reposter_id};
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < latest.size(); ++i) {
    if (latest[i].step >= 0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (latest[a].step != latest[b].step) return latest[a].step > latest[b].step;
    return a > b;
  });
  if (order.size() > kFollowedSlots) order.resize(kFollowedSlots);
  std::vector<char> shown(state.posts.size(), 0);
  for (const auto i : order) {
    shown[i] = 1;
    t.followed_slots.push_back(
        make_entry(state, post_at(i), followed, followers, reposted, latest[i].reposter));
  }

  std::vector<PostId> candidates;
  for (const auto& p : state.posts) {
    if (p.author_id == user || followed[index_of(p.author_id)] || shown[index_of(p.post_id)]) continue;
    if (options.discovery_window > 0 && p.created_step < state.step - options.discovery_window) continue;
    candidates.push_back(p.post_id);
  }
  if (!candidates.empty()) {
    const auto& viewer = state.personas[index_of(user)];
    for (const auto id : policy.select(candidates, viewer, state, rng, kDiscoverySlots)) {
      t.discovery_slots.push_back(make_entry(state, id, followed, followers, reposted, std::nullopt));
    }
  }
  return t;
}

std::vector<std::string> recent_posts_of(const PlatformState& state, UserId user, std::size_t k) {
  std::vector<std::string> out;
  for (auto it = state.posts.rbegin(); it != state.posts.rend() && out.size() < k; ++it) {
    if (it->author_id == user) out.push_back(it->text);
  }
  return out;
}

EventRecord step(PlatformState& state, const StepEnv& env, Rng& rng) {
  if (state.personas.empty()) throw ArgumentError("step: no users");
  const auto user = user_at(rng.below(state.personas.size()));

  AgentView view;
  view.user_id = user;
  view.persona = state.personas[index_of(user)];
  view.headlines = sample_headlines(env.news, env.headlines, rng);
  view.timeline = build_timeline(state, user, env.policy, rng, env.timeline);
  view.own_recent_posts = recent_posts_of(state, user, env.recent_posts);
  view.visibility = env.visibility;

  EventRecord e;
  e.step = state.step;
  e.user_id = user;
  auto skip = [&](std::string cause) {
    e.kind = EventKind::Skip;
    e.post_id.reset();
    e.text.clear();
    e.headline_id.reset();
    e.follow_target.reset();
    e.skip_cause = std::move(cause);
  };

  DecisionOutcome outcome;
  try {
    outcome = env.backend.decide(view, rng);
  } catch (const CacheMissError&) {
    throw;
  } catch (const Error& ex) {
    outcome = Skip{std::string("backend error: ") + ex.what()};
  }

  if (const auto* s = std::get_if<Skip>(&outcome)) {
    skip(s->cause);
  } else {
    const auto& d = std::get<ActionDecision>(outcome);
    e.reasoning = d.reasoning;
    if (const auto failure = check_decision(d, view)) {
      skip("invalid decision (" + std::string(to_string(failure->kind)) + "): " + failure->detail);
    } else {
      if (d.action == ActionKind::Post) {
        e.kind = EventKind::Post;
        e.post_id = post_at(state.posts.size());
        e.text = d.post_text;
        e.headline_id = d.chosen_headline;
      } else {
        e.kind = EventKind::Repost;
        e.post_id = d.repost_target;
      }
      e.follow_target = d.follow_target;
      if (auto conflict = event_conflict(state, e)) skip(std::move(*conflict));
    }
  }
  apply_event(state, e);
  return e;
}

// ---------------------------------------------------------------------------
// RunConfig

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, unused] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key '" + where + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

template <typename T>
void read_count(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  std::int64_t v = 0;
  read(j, key, v, where);
  if (v < 0) throw ConfigError("config key '" + where + key + "' must not be negative");
  out = static_cast<T>(v);
}

void read_mode(const json& j, const char* key, CacheMode& out, const std::string& where) {
  std::string s(to_string(out));
  read(j, key, s, where);
  out = cache_mode_from_string(s);
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(n_users >= 2, "n_users must be at least 2");
  require(n_steps >= 1, "n_steps must be at least 1");
  require(snapshot_every >= 0, "snapshot_every must not be negative");
  require(discovery_window >= 0, "discovery_window must not be negative");
  require(out_partisan_alpha >= 0, "out_partisan_alpha must not be negative");
  require(headlines_per_step >= 1, "headlines_per_step must be at least 1");
  visibility_flags_for(intervention);
  require(backend.kind == "stub" || backend.kind == "llm", "backend.kind must be 'stub' or 'llm'");
  const auto& s = backend.stub;
  require(s.homophily >= 0 && s.homophily <= 1, "backend.homophily must be in [0, 1]");
  require(s.engagement_bias >= 0, "backend.engagement_bias must not be negative");
  require(s.follow_rate >= 0 && s.follow_rate <= 1, "backend.follow_rate must be in [0, 1]");
  require(s.post_rate >= 0 && s.post_rate <= 1, "backend.post_rate must be in [0, 1]");
  require(!llm.agent.model.empty(), "llm.model must not be empty");
  require(llm.agent.temperature >= 0, "llm.temperature must not be negative");
  require(llm.agent.max_tokens >= 1, "llm.max_tokens must be at least 1");
  require(llm.agent.max_attempts >= 1, "llm.max_attempts must be at least 1");
  require(llm.max_retries >= 0, "llm.max_retries must not be negative");
  require(llm.max_in_flight >= 1, "llm.max_in_flight must be at least 1");
  require(bridging.scorer == "local" || bridging.scorer == "perspective",
          "bridging.scorer must be 'local' or 'perspective'");
  require(!bridging.attributes.empty(), "bridging.attributes must not be empty");
}

json RunConfig::to_json() const {
  return json{
      {"n_users", n_users},
      {"n_steps", n_steps},
      {"seed", seed},
      {"intervention", intervention},
      {"out_partisan_alpha", out_partisan_alpha},
      {"discovery_window", discovery_window},
      {"snapshot_every", snapshot_every},
      {"recent_posts", recent_posts},
      {"headlines_per_step", headlines_per_step},
      {"backend",
       {{"kind", backend.kind},
        {"homophily", backend.stub.homophily},
        {"engagement_bias", backend.stub.engagement_bias},
        {"follow_rate", backend.stub.follow_rate},
        {"post_rate", backend.stub.post_rate}}},
      {"llm",
       {{"model", llm.agent.model},
        {"temperature", llm.agent.temperature},
        {"max_tokens", llm.agent.max_tokens},
        {"max_attempts", llm.agent.max_attempts},
        {"mode", to_string(llm.mode)},
        {"cache_dir", llm.cache_dir},
        {"base_url", llm.base_url},
        {"max_retries", llm.max_retries},
        {"max_in_flight", llm.max_in_flight}}},
      {"bridging",
       {{"scorer", bridging.scorer},
        {"attributes", bridging.attributes},
        {"mode", to_string(bridging.mode)},
        {"cache_dir", bridging.cache_dir}}},
      {"data",
       {{"personas_path", data.personas_path},
        {"news_path", data.news_path},
        {"templates_dir", data.templates_dir},
        {"enrich", data.enrich},
        {"enrichment_cache_dir", data.enrichment_cache_dir}}},
  };
}

RunConfig RunConfig::from_json(const json& doc) {
  RunConfig c;
  check_keys(doc,
             {"n_users", "n_steps", "seed", "intervention", "out_partisan_alpha", "discovery_window",
              "snapshot_every", "recent_posts", "headlines_per_step", "backend", "llm", "bridging",
              "data"},
             "");
  read_count(doc, "n_users", c.n_users, "");
  read(doc, "n_steps", c.n_steps, "");
  read_count(doc, "seed", c.seed, "");
  read(doc, "intervention", c.intervention, "");
  read(doc, "out_partisan_alpha", c.out_partisan_alpha, "");
  read(doc, "discovery_window", c.discovery_window, "");
  read(doc, "snapshot_every", c.snapshot_every, "");
  read_count(doc, "recent_posts", c.recent_posts, "");
  read_count(doc, "headlines_per_step", c.headlines_per_step, "");
  if (doc.contains("backend")) {
    const auto& b = doc["backend"];
    check_keys(b, {"kind", "homophily", "engagement_bias", "follow_rate", "post_rate"}, "backend.");
    read(b, "kind", c.backend.kind, "backend.");
    read(b, "homophily", c.backend.stub.homophily, "backend.");
    read(b, "engagement_bias", c.backend.stub.engagement_bias, "backend.");
    read(b, "follow_rate", c.backend.stub.follow_rate, "backend.");
    read(b, "post_rate", c.backend.stub.post_rate, "backend.");
  }
  if (doc.contains("llm")) {
    const auto& l = doc["llm"];
    check_keys(l,
               {"model", "temperature", "max_tokens", "max_attempts", "mode", "cache_dir", "base_url",
                "max_retries", "max_in_flight"},
               "llm.");
    read(l, "model", c.llm.agent.model, "llm.");
    read(l, "temperature", c.llm.agent.temperature, "llm.");
    read(l, "max_tokens", c.llm.agent.max_tokens, "llm.");
    read(l, "max_attempts", c.llm.agent.max_attempts, "llm.");
    read_mode(l, "mode", c.llm.mode, "llm.");
    read(l, "cache_dir", c.llm.cache_dir, "llm.");
    read(l, "base_url", c.llm.base_url, "llm.");
    read(l, "max_retries", c.llm.max_retries, "llm.");
    read(l, "max_in_flight", c.llm.max_in_flight, "llm.");
  }
  if (doc.contains("bridging")) {
    const auto& b = doc["bridging"];
    check_keys(b, {"scorer", "attributes", "mode", "cache_dir"}, "bridging.");
    read(b, "scorer", c.bridging.scorer, "bridging.");
    read(b, "attributes", c.bridging.attributes, "bridging.");
    read_mode(b, "mode", c.bridging.mode, "bridging.");
    read(b, "cache_dir", c.bridging.cache_dir, "bridging.");
  }
  if (doc.contains("data")) {
    const auto& d = doc["data"];
    check_keys(d, {"personas_path", "news_path", "templates_dir", "enrich", "enrichment_cache_dir"},
               "data.");
    read(d, "personas_path", c.data.personas_path, "data.");
    read(d, "news_path", c.data.news_path, "data.");
    read(d, "templates_dir", c.data.templates_dir, "data.");
    read(d, "enrich", c.data.enrich, "data.");
    read(d, "enrichment_cache_dir", c.data.enrichment_cache_dir, "data.");
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const auto doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  auto c = from_json(doc);
  c.base_dir = path.parent_path();
  return c;
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

// ---------------------------------------------------------------------------
// run

std::vector<Persona> personas_for(const RunConfig& config, bool* with_replacement) {
  if (with_replacement) *with_replacement = false;
  if (config.data.personas_path.empty()) return synthesize_personas(config.n_users, config.seed);
  const auto pool = load_personas(config.resolve(config.data.personas_path));
  Rng rng(config.seed ^ 0x7065727361ULL);
  auto sel = select_personas(pool, config.n_users, rng);
  if (with_replacement) *with_replacement = sel.with_replacement;
  return std::move(sel.personas);
}

NewsCorpus news_for(const RunConfig& config) {
  if (config.data.news_path.empty()) return synthesize_news(1000, config.seed);
  return load_news(config.resolve(config.data.news_path));
}

RunResult run(const RunConfig& config, const std::filesystem::path& out_dir, RunDependencies deps) {
  config.validate();
  auto log = deps.log ? deps.log : [](const std::string&) {};
  RunResult result;
  result.config_hash = config.hash();

  std::vector<Persona> personas;
  if (deps.personas) {
    personas = std::move(*deps.personas);
    if (personas.size() != config.n_users) {
      throw ConfigError("n_users is " + std::to_string(config.n_users) + " but " +
                        std::to_string(personas.size()) + " personas were supplied");
    }
  } else {
    personas = personas_for(config, &result.personas_with_replacement);
    if (!config.data.personas_path.empty()) {
      log(std::string("sampled ") + std::to_string(personas.size()) + " personas " +
          (result.personas_with_replacement ? "with" : "without") + " replacement");
    }
  }

  const PromptTemplates templates = config.data.templates_dir.empty()
                                        ? PromptTemplates::defaults()
                                        : PromptTemplates::load(config.resolve(config.data.templates_dir));

  std::unique_ptr<LlmClient> llm;
  const bool needs_llm = (config.backend.kind == "llm" && !deps.backend) || config.data.enrich;
  if (needs_llm) {
    LlmClientOptions opts;
    apply_llm_environment(opts);
    if (!config.llm.base_url.empty()) opts.base_url = config.llm.base_url;
    opts.mode = config.llm.mode;
    opts.cache_dir = config.resolve(config.llm.cache_dir);
    opts.retry.max_retries = config.llm.max_retries;
    opts.max_in_flight = config.llm.max_in_flight;
    auto transport = deps.llm_transport ? deps.llm_transport : std::make_shared<HttpTransport>();
    llm = std::make_unique<LlmClient>(opts, transport, deps.sleeper);
  }

  if (config.data.enrich) {
    EnrichmentOptions eo;
    eo.model = config.llm.agent.model;
    eo.temperature = config.llm.agent.temperature;
    eo.max_tokens = config.llm.agent.max_tokens;
    eo.cache_dir = config.resolve(config.data.enrichment_cache_dir);
    eo.max_in_flight = config.llm.max_in_flight;
    PersonaEnricher enricher(*llm, eo, templates);
    auto batch = enrich_all(personas, enricher);
    for (auto& f : batch.failures) {
      log("enrichment: " + f);
      result.warnings.push_back("enrichment: " + f);
    }
    personas = std::move(batch.personas);
  }

  const NewsCorpus news = deps.news ? std::move(*deps.news) : news_for(config);
  if (news.empty()) throw DataError("news corpus is empty");

  std::unique_ptr<AgentBackend> own_backend;
  AgentBackend* backend = deps.backend;
  if (!backend) {
    if (config.backend.kind == "llm") {
      own_backend = std::make_unique<LlmBackend>(*llm, config.llm.agent, templates);
    } else {
      own_backend = std::make_unique<StubBackend>(config.backend.stub);
    }
    backend = own_backend.get();
  }

  std::unique_ptr<BridgingScorer> own_scorer;
  BridgingScorer* scorer = deps.scorer;
  if (!scorer && config.intervention == "bridging_attributes") {
    if (config.bridging.scorer == "perspective") {
      PerspectiveOptions po;
      po.attributes = config.bridging.attributes;
      po.mode = config.bridging.mode;
      po.cache_dir = config.resolve(config.bridging.cache_dir);
      apply_perspective_environment(po);
      auto transport =
          deps.perspective_transport ? deps.perspective_transport : std::make_shared<HttpTransport>();
      own_scorer = std::make_unique<PerspectiveScorer>(po, transport, deps.sleeper);
    } else {
      own_scorer = std::make_unique<LexiconBridgingScorer>(config.bridging.attributes);
    }
    scorer = own_scorer.get();
  }
  auto policy = make_policy(config.intervention, {config.out_partisan_alpha, scorer});

  PlatformState state;
  state.personas = personas;
  state.rng = Rng(config.seed);

  std::filesystem::create_directories(out_dir);
  result.events_path = out_dir / "events.jsonl";
  result.snapshot_path = out_dir / "snapshot.json";
  std::ofstream out(result.events_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + result.events_path.string());
  out << event_log_header(result.config_hash, config.intervention, config.seed, personas).dump() << '\n';

  const StepEnv env{*backend,
                    *policy,
                    news,
                    visibility_flags_for(config.intervention),
                    {config.discovery_window},
                    config.recent_posts,
                    config.headlines_per_step};
  int durable = -1;
  auto io_failure = [&](const std::string& what) {
    return IoError(what + (durable < 0 ? std::string("; no snapshot was written")
                                       : "; last durable snapshot at step " + std::to_string(durable)));
  };
  auto snapshot = [&] {
    out.flush();
    if (!out) throw io_failure("writing " + result.events_path.string() + " failed");
    try {
      write_snapshot(result.snapshot_path, state, result.config_hash);
    } catch (const Error& e) {
      throw io_failure(e.what());
    }
    durable = state.step;
  };

  result.events.reserve(static_cast<std::size_t>(config.n_steps));
  for (int i = 0; i < config.n_steps; ++i) {
    auto e = step(state, env, state.rng);
    out << json(e).dump() << '\n';
    if (!out) throw io_failure("writing " + result.events_path.string() + " failed");
    result.events.push_back(std::move(e));
    for (auto& w : policy->take_warnings()) {
      log(w);
      result.warnings.push_back(std::move(w));
    }
    if (config.snapshot_every > 0 && (i + 1) % config.snapshot_every == 0) snapshot();
  }
  if (durable != state.step) snapshot();
  out.close();

  result.summary = summarize_run(result.events, state);
  if (llm) result.llm_usage = llm->usage_report();
  result.final_state = std::move(state);
  return result;
}

}  // namespace socsim
