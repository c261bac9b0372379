#include "socsim/domain.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "socsim/errors.hpp"

namespace socsim {

using nlohmann::json;

std::string_view to_string(Party party) {
  switch (party) {
    case Party::Democrat:
      return "Democrat";
    case Party::Republican:
      return "Republican";
    case Party::NonPartisan:
      return "NonPartisan";
  }
  return "NonPartisan";
}

Party party_from_string(std::string_view name) {
  if (name == "Democrat") return Party::Democrat;
  if (name == "Republican") return Party::Republican;
  if (name == "NonPartisan") return Party::NonPartisan;
  throw DataError("unknown party '" + std::string(name) + "'");
}

Persona make_persona(std::string user_id, int partisanship) {
  Persona p;
  p.user_id = std::move(user_id);
  p.partisanship = partisanship;
  p.party = party_for(partisanship);
  return p;
}

bool PlatformState::same_content(const PlatformState& other) const {
  return personas == other.personas && posts == other.posts &&
         reposts == other.reposts && follows == other.follows && step == other.step;
}

std::vector<int> follower_counts(const PlatformState& state) {
  std::vector<int> counts(state.personas.size(), 0);
  for (const auto& f : state.follows) {
    if (index_of(f.followee_id) < counts.size()) ++counts[index_of(f.followee_id)];
  }
  return counts;
}

namespace {

std::string user_label(const PlatformState& s, UserId id) {
  const auto i = index_of(id);
  std::string label = "user #" + std::to_string(i);
  if (i < s.personas.size()) label += " (" + s.personas[i].user_id + ")";
  return label;
}

}  // namespace

std::vector<std::string> validate_state(const PlatformState& s) {
  std::vector<std::string> out;
  const auto n_users = s.personas.size();
  const auto n_posts = s.posts.size();
  auto user_ok = [&](UserId id) { return index_of(id) < n_users; };
  auto post_ok = [&](PostId id) { return index_of(id) < n_posts; };

  std::set<std::string> ids;
  for (std::size_t i = 0; i < n_users; ++i) {
    const auto& p = s.personas[i];
    const std::string who = "persona #" + std::to_string(i) + " (" + p.user_id + ")";
    if (!ids.insert(p.user_id).second) out.push_back(who + ": duplicate user_id");
    if (p.partisanship < kMinPartisanship || p.partisanship > kMaxPartisanship) {
      out.push_back(who + ": partisanship " + std::to_string(p.partisanship) +
                    " outside [-3, 3]");
    }
    if (p.party != party_for(p.partisanship)) {
      out.push_back(who + ": party " + std::string(to_string(p.party)) +
                    " inconsistent with partisanship " + std::to_string(p.partisanship));
    }
  }

  std::vector<int> actual_reposts(n_posts, 0);
  std::set<std::pair<std::size_t, std::size_t>> repost_pairs;
  for (std::size_t i = 0; i < s.reposts.size(); ++i) {
    const auto& r = s.reposts[i];
    const std::string what = "repost #" + std::to_string(i);
    if (!user_ok(r.reposter_id)) out.push_back(what + ": unknown reposter");
    if (!post_ok(r.post_id)) {
      out.push_back(what + ": unknown post #" + std::to_string(index_of(r.post_id)));
      continue;
    }
    ++actual_reposts[index_of(r.post_id)];
    if (s.posts[index_of(r.post_id)].author_id == r.reposter_id) {
      out.push_back(what + ": " + user_label(s, r.reposter_id) + " reposted own post #" +
                    std::to_string(index_of(r.post_id)));
    }
    if (!repost_pairs.emplace(index_of(r.reposter_id), index_of(r.post_id)).second) {
      out.push_back(what + ": duplicate repost of post #" +
                    std::to_string(index_of(r.post_id)) + " by " +
                    user_label(s, r.reposter_id));
    }
    if (r.step > s.step) out.push_back(what + ": step in the future");
  }

  for (std::size_t i = 0; i < n_posts; ++i) {
    const auto& p = s.posts[i];
    const std::string what = "post #" + std::to_string(i);
    if (index_of(p.post_id) != i) out.push_back(what + ": post_id does not match position");
    if (!user_ok(p.author_id)) out.push_back(what + ": unknown author");
    if (p.created_step > s.step) out.push_back(what + ": created_step in the future");
    if (p.repost_count < 0) out.push_back(what + ": negative repost_count");
    if (p.repost_count != actual_reposts[i]) {
      out.push_back(what + ": repost_count " + std::to_string(p.repost_count) + " but " +
                    std::to_string(actual_reposts[i]) + " repost events");
    }
  }

  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < s.follows.size(); ++i) {
    const auto& f = s.follows[i];
    const std::string what = "follow edge #" + std::to_string(i);
    if (!user_ok(f.follower_id) || !user_ok(f.followee_id)) {
      out.push_back(what + ": unknown user");
      continue;
    }
    if (f.follower_id == f.followee_id) {
      out.push_back(what + ": self-follow by " + user_label(s, f.follower_id));
    }
    if (!edges.emplace(index_of(f.follower_id), index_of(f.followee_id)).second) {
      out.push_back(what + ": duplicate follow " + user_label(s, f.follower_id) + " -> " +
                    user_label(s, f.followee_id));
    }
    if (f.step > s.step) out.push_back(what + ": step in the future");
  }
  return out;
}

void to_json(json& j, const Persona& p) {
  j = json{{"user_id", p.user_id},
           {"age", p.age},
           {"gender", p.gender},
           {"income_bracket", p.income_bracket},
           {"education", p.education},
           {"party", to_string(p.party)},
           {"partisanship", p.partisanship},
           {"ideology", p.ideology},
           {"religion", p.religion},
           {"interests", p.interests},
           {"biography", p.biography},
           {"occupation", p.occupation}};
}

void from_json(const json& j, Persona& p) {
  j.at("user_id").get_to(p.user_id);
  j.at("age").get_to(p.age);
  j.at("gender").get_to(p.gender);
  j.at("income_bracket").get_to(p.income_bracket);
  j.at("education").get_to(p.education);
  j.at("partisanship").get_to(p.partisanship);
  p.party = j.contains("party") ? party_from_string(j.at("party").get<std::string>())
                                : party_for(p.partisanship);
  j.at("ideology").get_to(p.ideology);
  j.at("religion").get_to(p.religion);
  j.at("interests").get_to(p.interests);
  p.biography = j.value("biography", "");
  p.occupation = j.value("occupation", "");
}

void to_json(json& j, const NewsItem& n) {
  j = json{{"item_id", n.item_id},
           {"headline", n.headline},
           {"category", n.category},
           {"description", n.description}};
}

void from_json(const json& j, NewsItem& n) {
  j.at("item_id").get_to(n.item_id);
  j.at("headline").get_to(n.headline);
  n.category = j.value("category", "");
  n.description = j.value("description", "");
}

void to_json(json& j, const Post& p) {
  j = json{{"post_id", p.post_id},
           {"author_id", p.author_id},
           {"text", p.text},
           {"source_news", p.source_news ? json(*p.source_news) : json(nullptr)},
           {"created_step", p.created_step},
           {"repost_count", p.repost_count}};
}

void from_json(const json& j, Post& p) {
  j.at("post_id").get_to(p.post_id);
  j.at("author_id").get_to(p.author_id);
  j.at("text").get_to(p.text);
  const auto& src = j.at("source_news");
  p.source_news = src.is_null() ? std::nullopt : std::optional(src.get<std::int64_t>());
  j.at("created_step").get_to(p.created_step);
  j.at("repost_count").get_to(p.repost_count);
}

void to_json(json& j, const RepostEvent& r) {
  j = json{{"reposter_id", r.reposter_id}, {"post_id", r.post_id}, {"step", r.step}};
}

void from_json(const json& j, RepostEvent& r) {
  j.at("reposter_id").get_to(r.reposter_id);
  j.at("post_id").get_to(r.post_id);
  j.at("step").get_to(r.step);
}

void to_json(json& j, const FollowEdge& f) {
  j = json{{"follower_id", f.follower_id}, {"followee_id", f.followee_id}, {"step", f.step}};
}

void from_json(const json& j, FollowEdge& f) {
  j.at("follower_id").get_to(f.follower_id);
  j.at("followee_id").get_to(f.followee_id);
  j.at("step").get_to(f.step);
}

json snapshot_json(const PlatformState& state, std::string_view config_hash) {
  return json{{"schema_version", kSnapshotSchemaVersion},
              {"config_hash", config_hash},
              {"step", state.step},
              {"rng_state", state.rng.state()},
              {"personas", state.personas},
              {"posts", state.posts},
              {"reposts", state.reposts},
              {"follows", state.follows}};
}

PlatformState state_from_snapshot(const json& doc, std::string* config_hash) {
  try {
    if (doc.at("schema_version").get<int>() != kSnapshotSchemaVersion) {
      throw DataError("unsupported snapshot schema_version");
    }
    PlatformState s;
    doc.at("personas").get_to(s.personas);
    doc.at("posts").get_to(s.posts);
    doc.at("reposts").get_to(s.reposts);
    doc.at("follows").get_to(s.follows);
    doc.at("step").get_to(s.step);
    s.rng.restore(doc.at("rng_state").get<std::string>());
    if (config_hash) *config_hash = doc.at("config_hash").get<std::string>();
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed snapshot: ") + e.what());
  }
}

void write_snapshot(const std::filesystem::path& path, const PlatformState& state,
                    std::string_view config_hash) {
  write_file_atomic(path, snapshot_json(state, config_hash).dump());
}

PlatformState read_snapshot(const std::filesystem::path& path, std::string* config_hash) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return state_from_snapshot(doc, config_hash);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace socsim
