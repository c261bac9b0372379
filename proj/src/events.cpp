#include "socsim/events.hpp"

#include <fstream>

#include "socsim/errors.hpp"

namespace socsim {

using nlohmann::json;

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Post:
      return "post";
    case EventKind::Repost:
      return "repost";
    case EventKind::Skip:
      return "skip";
  }
  return "skip";
}

void to_json(json& j, const EventRecord& e) {
  j = json{{"step", e.step}, {"user_id", e.user_id}, {"kind", to_string(e.kind)}};
  switch (e.kind) {
    case EventKind::Post:
      j["post_id"] = *e.post_id;
      j["text"] = e.text;
      j["headline_id"] = e.headline_id ? json(*e.headline_id) : json(nullptr);
      break;
    case EventKind::Repost:
      j["post_id"] = *e.post_id;
      break;
    case EventKind::Skip:
      j["cause"] = e.skip_cause;
      break;
  }
  if (e.follow_target) j["follow_target"] = *e.follow_target;
  j["reasoning"] = e.reasoning;
}

void from_json(const json& j, EventRecord& e) {
  e = EventRecord{};
  j.at("step").get_to(e.step);
  j.at("user_id").get_to(e.user_id);
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "post") {
    e.kind = EventKind::Post;
    e.post_id = j.at("post_id").get<PostId>();
    j.at("text").get_to(e.text);
    const auto& h = j.at("headline_id");
    if (!h.is_null()) e.headline_id = h.get<std::int64_t>();
  } else if (kind == "repost") {
    e.kind = EventKind::Repost;
    e.post_id = j.at("post_id").get<PostId>();
  } else if (kind == "skip") {
    e.kind = EventKind::Skip;
    j.at("cause").get_to(e.skip_cause);
  } else {
    throw DataError("unknown event kind '" + kind + "'");
  }
  if (j.contains("follow_target")) e.follow_target = j["follow_target"].get<UserId>();
  e.reasoning = j.value("reasoning", "");
}

std::optional<std::string> event_conflict(const PlatformState& s, const EventRecord& e) {
  if (e.step != s.step) {
    return "event step " + std::to_string(e.step) + " does not follow state step " +
           std::to_string(s.step);
  }
  if (index_of(e.user_id) >= s.personas.size()) return std::string("unknown user");
  switch (e.kind) {
    case EventKind::Post:
      if (!e.post_id || index_of(*e.post_id) != s.posts.size()) {
        return std::string("post id out of sequence");
      }
      break;
    case EventKind::Repost: {
      if (!e.post_id || index_of(*e.post_id) >= s.posts.size()) {
        return std::string("repost of unknown post");
      }
      if (s.posts[index_of(*e.post_id)].author_id == e.user_id) {
        return std::string("self-repost rejected");
      }
      for (const auto& r : s.reposts) {
        if (r.reposter_id == e.user_id && r.post_id == *e.post_id) {
          return "duplicate repost of post " + std::to_string(index_of(*e.post_id)) + " rejected";
        }
      }
      break;
    }
    case EventKind::Skip:
      if (e.follow_target) return std::string("skip event cannot carry a follow");
      return std::nullopt;
  }
  if (e.follow_target) {
    if (index_of(*e.follow_target) >= s.personas.size()) return std::string("follow of unknown user");
    if (*e.follow_target == e.user_id) return std::string("self-follow rejected");
    for (const auto& f : s.follows) {
      if (f.follower_id == e.user_id && f.followee_id == *e.follow_target) {
        return std::string("duplicate follow rejected");
      }
    }
  }
  return std::nullopt;
}

void apply_event(PlatformState& s, const EventRecord& e) {
  if (auto conflict = event_conflict(s, e)) {
    throw DataError("cannot apply event at step " + std::to_string(e.step) + ": " + *conflict);
  }
  switch (e.kind) {
    case EventKind::Post:
      s.posts.push_back(Post{*e.post_id, e.user_id, e.text, e.headline_id, e.step, 0});
      break;
    case EventKind::Repost:
      s.reposts.push_back(RepostEvent{e.user_id, *e.post_id, e.step});
      ++s.posts[index_of(*e.post_id)].repost_count;
      break;
    case EventKind::Skip:
      break;
  }
  if (e.follow_target) s.follows.push_back(FollowEdge{e.user_id, *e.follow_target, e.step});
  s.step = e.step + 1;
}

json event_log_header(std::string_view config_hash, std::string_view condition, std::uint64_t seed,
                      const std::vector<Persona>& personas) {
  return json{{"header",
               {{"schema_version", kEventLogSchemaVersion},
                {"config_hash", config_hash},
                {"condition", condition},
                {"seed", seed},
                {"personas", personas}}}};
}

EventLog read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event log " + path.string());
  EventLog log;
  std::string text;
  std::size_t line = 0;
  auto corrupt = [&](const std::string& why) {
    return DataError(path.string() + ": corrupt event log at line " + std::to_string(line) +
                         " (last valid line " + std::to_string(line - 1) + "): " + why,
                     line);
  };
  while (std::getline(in, text)) {
    ++line;
    const auto doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw corrupt("not a JSON object");
    if (line == 1) {
      if (!doc.contains("header")) throw corrupt("missing header record");
      const auto& h = doc["header"];
      if (h.value("schema_version", 0) != kEventLogSchemaVersion) {
        throw corrupt("unsupported schema_version");
      }
      try {
        log.config_hash = h.at("config_hash").get<std::string>();
        log.condition = h.value("condition", "");
        log.seed = h.value("seed", std::uint64_t{0});
        h.at("personas").get_to(log.personas);
      } catch (const json::exception& e) {
        throw corrupt(e.what());
      }
      continue;
    }
    try {
      log.events.push_back(doc.get<EventRecord>());
    } catch (const json::exception& e) {
      throw corrupt(e.what());
    } catch (const DataError& e) {
      throw corrupt(e.what());
    }
  }
  if (line == 0) throw DataError(path.string() + ": empty event log");
  return log;
}

PlatformState replay_events(std::vector<Persona> personas, const std::vector<EventRecord>& events) {
  PlatformState s;
  s.personas = std::move(personas);
  for (const auto& e : events) apply_event(s, e);
  return s;
}

}  // namespace socsim
