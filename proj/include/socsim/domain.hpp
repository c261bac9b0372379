#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "socsim/rng.hpp"

namespace socsim {

/// Index of a persona within `PlatformState::personas`.
enum class UserId : std::uint32_t {};
/// Index of a post within `PlatformState::posts`; also its creation order.
enum class PostId : std::uint32_t {};

constexpr std::size_t index_of(UserId id) { return static_cast<std::size_t>(id); }
constexpr std::size_t index_of(PostId id) { return static_cast<std::size_t>(id); }
constexpr UserId user_at(std::size_t i) { return static_cast<UserId>(i); }
constexpr PostId post_at(std::size_t i) { return static_cast<PostId>(i); }

enum class Party { Democrat, Republican, NonPartisan };

/// Party implied by a signed 7-point partisanship score.
constexpr Party party_for(int partisanship) {
  if (partisanship < 0) return Party::Democrat;
  if (partisanship > 0) return Party::Republican;
  return Party::NonPartisan;
}

std::string_view to_string(Party party);
Party party_from_string(std::string_view name);

inline constexpr int kMinPartisanship = -3;
inline constexpr int kMaxPartisanship = 3;

struct Persona {
  std::string user_id;
  int age = 0;
  std::string gender;
  std::string income_bracket;
  std::string education;
  Party party = Party::NonPartisan;
  /// -3 strong Democrat ... +3 strong Republican, 0 independent.
  int partisanship = 0;
  std::string ideology;
  std::string religion;
  std::vector<std::string> interests;
  std::string biography;
  std::string occupation;

  int extremity() const { return partisanship < 0 ? -partisanship : partisanship; }

  friend bool operator==(const Persona&, const Persona&) = default;
};

/// Builds a persona with `party` derived from `partisanship`.
Persona make_persona(std::string user_id, int partisanship);

struct NewsItem {
  std::int64_t item_id = 0;
  std::string headline;
  std::string category;
  std::string description;

  friend bool operator==(const NewsItem&, const NewsItem&) = default;
};

struct Post {
  PostId post_id{};
  UserId author_id{};
  std::string text;
  std::optional<std::int64_t> source_news;  // NewsItem::item_id
  int created_step = 0;
  int repost_count = 0;

  friend bool operator==(const Post&, const Post&) = default;
};

struct RepostEvent {
  UserId reposter_id{};
  PostId post_id{};
  int step = 0;

  friend bool operator==(const RepostEvent&, const RepostEvent&) = default;
};

struct FollowEdge {
  UserId follower_id{};
  UserId followee_id{};
  int step = 0;

  friend bool operator==(const FollowEdge&, const FollowEdge&) = default;
};

/// Mutable platform state. A plain aggregate so that tests and loaders can
/// build arbitrary (including invalid) states; `validate_state` reports
/// broken invariants and the engine is the only writer during a run.
struct PlatformState {
  std::vector<Persona> personas;
  std::vector<Post> posts;
  std::vector<RepostEvent> reposts;
  std::vector<FollowEdge> follows;
  int step = 0;
  Rng rng;

  /// Everything except the generator state.
  bool same_content(const PlatformState& other) const;
  friend bool operator==(const PlatformState&, const PlatformState&) = default;
};

/// Per-user follower counts derived from `follows`.
std::vector<int> follower_counts(const PlatformState& state);

/// One human-readable entry per broken invariant; empty when the state is
/// consistent.
std::vector<std::string> validate_state(const PlatformState& state);

struct TimelineEntry {
  PostId post_id{};
  UserId author_id{};
  std::string author_handle;
  std::string author_biography;
  int author_partisanship = 0;
  int author_follower_count = 0;
  bool author_followed = false;
  int repost_count = 0;
  std::string text;
  bool is_repost_surfaced = false;
  std::optional<UserId> surfaced_by;
  std::string surfaced_by_handle;
  bool reposted_by_owner = false;

  friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

inline constexpr std::size_t kFollowedSlots = 5;
inline constexpr std::size_t kDiscoverySlots = 5;

struct Timeline {
  UserId owner_id{};
  std::vector<TimelineEntry> followed_slots;
  std::vector<TimelineEntry> discovery_slots;

  std::size_t size() const { return followed_slots.size() + discovery_slots.size(); }
  bool empty() const { return size() == 0; }
  /// Followed slots first, then discovery slots; this is the numbering the
  /// agent sees.
  const TimelineEntry& at(std::size_t i) const {
    return i < followed_slots.size() ? followed_slots[i]
                                     : discovery_slots[i - followed_slots.size()];
  }

  friend bool operator==(const Timeline&, const Timeline&) = default;
};

// JSON mapping, lower_snake_case field names.
void to_json(nlohmann::json& j, const Persona& p);
void from_json(const nlohmann::json& j, Persona& p);
void to_json(nlohmann::json& j, const NewsItem& n);
void from_json(const nlohmann::json& j, NewsItem& n);
void to_json(nlohmann::json& j, const Post& p);
void from_json(const nlohmann::json& j, Post& p);
void to_json(nlohmann::json& j, const RepostEvent& r);
void from_json(const nlohmann::json& j, RepostEvent& r);
void to_json(nlohmann::json& j, const FollowEdge& f);
void from_json(const nlohmann::json& j, FollowEdge& f);

inline constexpr int kSnapshotSchemaVersion = 1;

nlohmann::json snapshot_json(const PlatformState& state, std::string_view config_hash);
/// Parses a snapshot document; `config_hash` receives the embedded hash.
PlatformState state_from_snapshot(const nlohmann::json& doc, std::string* config_hash = nullptr);

void write_snapshot(const std::filesystem::path& path, const PlatformState& state,
                    std::string_view config_hash);
PlatformState read_snapshot(const std::filesystem::path& path,
                            std::string* config_hash = nullptr);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace socsim
