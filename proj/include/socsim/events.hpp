#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "socsim/domain.hpp"

namespace socsim {

/// The step's content action. A follow is not a separate kind: it rides on
/// the post or repost record of the same step (`follow_target`).
enum class EventKind { Post, Repost, Skip };

std::string_view to_string(EventKind kind);

/// One line of the event log; exactly one per step.
struct EventRecord {
  int step = 0;
  UserId user_id{};
  EventKind kind = EventKind::Skip;
  std::optional<PostId> post_id;  // created post, or repost target
  std::string text;               // Post only
  std::optional<std::int64_t> headline_id;
  std::optional<UserId> follow_target;
  std::string skip_cause;
  std::string reasoning;

  bool has_follow() const { return follow_target.has_value(); }

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

void to_json(nlohmann::json& j, const EventRecord& e);
void from_json(const nlohmann::json& j, EventRecord& e);

/// Why an event cannot be applied to a state, or nullopt when it can.
std::optional<std::string> event_conflict(const PlatformState& state, const EventRecord& e);

/// Applies one event and advances `state.step` past it. Throws DataError when
/// `event_conflict` reports a problem.
void apply_event(PlatformState& state, const EventRecord& e);

inline constexpr int kEventLogSchemaVersion = 1;

/// First line of every event log. It carries the personas so that a log
/// can be replayed on its own.
nlohmann::json event_log_header(std::string_view config_hash, std::string_view condition,
                                std::uint64_t seed, const std::vector<Persona>& personas);

struct EventLog {
  std::string config_hash;
  std::string condition;
  std::uint64_t seed = 0;
  std::vector<Persona> personas;
  std::vector<EventRecord> events;
};

/// Reads an event log. A malformed line raises DataError naming the line and
/// the last valid one.
EventLog read_event_log(const std::filesystem::path& path);

/// Rebuilds platform state by applying `events` to a state holding only
/// `personas`.
PlatformState replay_events(std::vector<Persona> personas, const std::vector<EventRecord>& events);

}  // namespace socsim
