#pragma once

#include <stdlib.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "socsim/agents.hpp"
#include "socsim/domain.hpp"
#include "socsim/llm.hpp"
#include "socsim/rng.hpp"

namespace socsim::test {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(SOCSIM_FIXTURE_DIR) / name;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "socsim-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Answers every POST with a handler and keeps the requests.
class ScriptedTransport final : public Transport {
 public:
  using Handler = std::function<HttpResponse(const HttpRequest&, std::size_t call)>;
  explicit ScriptedTransport(Handler handler) : handler_(std::move(handler)) {}

  HttpResponse post(const HttpRequest& request) override {
    std::size_t call;
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(request);
      call = requests_.size() - 1;
    }
    return handler_(request, call);
  }

  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return requests_.size();
  }
  std::vector<HttpRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  Handler handler_;
  mutable std::mutex mutex_;
  std::vector<HttpRequest> requests_;
};

/// Any use is a test failure: the exception is not a socsim::Error, so no
/// retry or skip logic can swallow it.
class FailingTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest&) override {
    ++uses;
    throw std::logic_error("network transport used where none was allowed");
  }
  std::atomic<int> uses{0};
};

inline std::string completion_body(const std::string& content, int prompt_tokens = 11,
                                   int completion_tokens = 7) {
  return nlohmann::json{
      {"id", "cmpl-test"},
      {"object", "chat.completion"},
      {"choices", {{{"index", 0},
                    {"message", {{"role", "assistant"}, {"content", content}}},
                    {"finish_reason", "stop"}}}},
      {"usage", {{"prompt_tokens", prompt_tokens}, {"completion_tokens", completion_tokens}}}}
      .dump();
}

inline PlatformState make_state(const std::vector<int>& partisanship) {
  PlatformState s;
  for (std::size_t i = 0; i < partisanship.size(); ++i) {
    auto p = make_persona("u" + std::to_string(i), partisanship[i]);
    p.age = 30 + static_cast<int>(i);
    p.biography = "Biography of user " + std::to_string(i) + ", who enjoys hiking.";
    p.occupation = "teacher";
    p.interests = {"hiking"};
    s.personas.push_back(std::move(p));
  }
  return s;
}

inline PostId add_post(PlatformState& s, std::size_t author, int step, std::string text = {}) {
  const auto id = post_at(s.posts.size());
  if (text.empty()) text = "post " + std::to_string(index_of(id));
  s.posts.push_back(Post{id, user_at(author), std::move(text), std::nullopt, step, 0});
  if (s.step <= step) s.step = step + 1;
  return id;
}

inline void add_repost(PlatformState& s, std::size_t reposter, PostId post, int step) {
  s.reposts.push_back(RepostEvent{user_at(reposter), post, step});
  ++s.posts[index_of(post)].repost_count;
  if (s.step <= step) s.step = step + 1;
}

inline void add_follow(PlatformState& s, std::size_t follower, std::size_t followee, int step) {
  s.follows.push_back(FollowEdge{user_at(follower), user_at(followee), step});
  if (s.step <= step) s.step = step + 1;
}

/// A random but internally consistent agent view: distinct posts by other
/// users, some followed, some already reposted, and 1-10 headlines. Every
/// author biography and the viewer's own biography contain a unique marker.
inline AgentView random_view(Rng& rng, VisibilityFlags visibility = {}) {
  AgentView v;
  const std::size_t n_users = 3 + rng.below(20);
  v.user_id = user_at(rng.below(n_users));
  v.persona = make_persona("viewer" + std::to_string(index_of(v.user_id)),
                           static_cast<int>(rng.below(7)) - 3);
  v.persona.age = 18 + static_cast<int>(rng.below(60));
  v.persona.interests = {"hiking", "chess"};
  v.persona.occupation = "pharmacist";
  v.persona.biography = "SELFBIO" + std::to_string(rng.below(1000000)) + " grew up near a lake.";
  v.visibility = visibility;
  v.timeline.owner_id = v.user_id;

  std::vector<int> followed(n_users, 0);
  for (auto& f : followed) f = rng.bernoulli(0.4);
  const std::size_t n_posts = rng.below(11);
  for (std::size_t i = 0; i < n_posts; ++i) {
    std::size_t author = rng.below(n_users);
    if (author == index_of(v.user_id)) author = (author + 1) % n_users;
    TimelineEntry e;
    e.post_id = post_at(i * 3 + rng.below(3));
    e.author_id = user_at(author);
    e.author_handle = "user" + std::to_string(author);
    e.author_biography = "AUTHORBIO" + std::to_string(author) + "x" + std::to_string(rng.below(1000000)) +
                         " likes birdwatching.";
    e.author_partisanship = static_cast<int>(rng.below(7)) - 3;
    e.author_follower_count = static_cast<int>(rng.below(900)) + 1;
    e.author_followed = followed[author];
    e.repost_count = static_cast<int>(rng.below(500)) + 1;
    e.text = "Opinion number " + std::to_string(i) + " about the news.";
    e.reposted_by_owner = rng.bernoulli(0.2);
    if (rng.bernoulli(0.2)) {
      std::size_t by = rng.below(n_users);
      if (by != index_of(v.user_id) && by != author) {
        e.is_repost_surfaced = true;
        e.surfaced_by = user_at(by);
        e.surfaced_by_handle = "user" + std::to_string(by);
      }
    }
    if (e.author_followed && v.timeline.followed_slots.size() < kFollowedSlots) {
      v.timeline.followed_slots.push_back(std::move(e));
    } else if (!e.author_followed && v.timeline.discovery_slots.size() < kDiscoverySlots) {
      v.timeline.discovery_slots.push_back(std::move(e));
    }
  }
  const std::size_t n_headlines = 1 + rng.below(10);
  for (std::size_t i = 0; i < n_headlines; ++i) {
    v.headlines.push_back(NewsItem{static_cast<std::int64_t>(100 + i * 7 + rng.below(7)),
                                   "Headline " + std::to_string(i), "POLITICS", "Details."});
  }
  const std::size_t n_recent = rng.below(4);
  for (std::size_t i = 0; i < n_recent; ++i) v.own_recent_posts.push_back("My earlier post " + std::to_string(i));
  return v;
}

/// A timeline entry as parsed back out of a rendered agent prompt.
struct PromptEntry {
  std::size_t number = 0;
  std::string handle;
  bool followed = false;
  bool reposted = false;
};

/// Parses the numbered timeline of an agent user message.
inline std::vector<PromptEntry> prompt_timeline(const std::string& user_message) {
  std::vector<PromptEntry> out;
  const auto start = user_message.find("Your timeline:\n");
  const auto end = user_message.find("\n\nNews headlines");
  if (start == std::string::npos || end == std::string::npos) return out;
  std::size_t pos = start + 15;
  while (pos < end) {
    auto nl = user_message.find('\n', pos);
    if (nl == std::string::npos || nl > end) nl = end;
    const auto line = user_message.substr(pos, nl - pos);
    if (line.size() > 2 && line[0] == '[') {
      PromptEntry e;
      e.number = std::stoul(line.substr(1));
      const auto at = line.find('@');
      const auto stop = line.find(' ', at);
      e.handle = line.substr(at + 1, stop == std::string::npos ? std::string::npos : stop - at - 1);
      e.followed = line.find("(you follow them)") != std::string::npos;
      out.push_back(e);
    } else if (!out.empty() && line.find("(you already reposted this)") != std::string::npos) {
      out.back().reposted = true;
    }
    pos = nl + 1;
  }
  return out;
}

/// A deterministic stand-in for a chat model answering agent prompts. Calls
/// listed in `malformed` get a non-JSON answer; a repair request (more than
/// two messages) always gets a valid one. Posts on every third call or when
/// nothing can be reposted, follows on even calls.
inline std::string scripted_agent_answer(const nlohmann::json& wire_body, std::size_t call,
                                         const std::vector<std::size_t>& malformed = {}) {
  using nlohmann::json;
  const auto& messages = wire_body.at("messages");
  const bool repair = messages.size() > 2;
  if (!repair && std::find(malformed.begin(), malformed.end(), call) != malformed.end()) {
    return "I think I'll repost #2";
  }
  const auto entries = prompt_timeline(messages.at(1).at("content").get<std::string>());
  const PromptEntry* repostable = nullptr;
  const PromptEntry* followable = nullptr;
  for (const auto& e : entries) {
    if (!repostable && !e.reposted) repostable = &e;
    if (!followable && !e.followed) followable = &e;
  }
  json answer;
  if (call % 3 == 0 || !repostable) {
    answer = {{"action", "post"},
              {"post_text", "Reading the news today (call " + std::to_string(call) + ") and sharing my view."},
              {"chosen_headline", 0},
              {"repost_target", nullptr}};
  } else {
    answer = {{"action", "repost"},
              {"post_text", nullptr},
              {"chosen_headline", nullptr},
              {"repost_target", repostable->number}};
  }
  answer["follow_target"] = (call % 2 == 0 && followable) ? json("@" + followable->handle) : json(nullptr);
  answer["reasoning"] = "Scripted answer " + std::to_string(call) + ".";
  return answer.dump();
}

}  // namespace socsim::test
