#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "socsim/domain.hpp"
#include "socsim/engine.hpp"
#include "socsim/metrics.hpp"

namespace socsim {

inline constexpr int kSummarySchemaVersion = 1;

/// One row of a summary CSV.
struct SummaryRow {
  int schema_version = kSummarySchemaVersion;
  std::string condition;
  std::uint64_t seed = 0;
  std::string config_hash;
  RunSummary summary;
};

/// Shortest round-trip-stable rendering used in every CSV ("%.12g").
std::string format_number(double value);

/// schema_version, condition, seed, config_hash, then the RunSummary fields.
std::vector<std::string> summary_columns();

std::string summary_csv(const std::vector<SummaryRow>& rows);
/// Throws DataError on unknown columns, bad numbers or mixed schema versions.
std::vector<SummaryRow> parse_summary_csv(std::istream& in, const std::string& source);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

/// user_id, user_index, party, partisanship, community
std::string communities_csv(const PlatformState& state, const std::vector<int>& communities);

/// Per-condition means (and standard errors when some condition has more
/// than one run), in condition name order.
std::string compare_csv(const std::vector<SummaryRow>& rows);

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitRuntimeError = 2;

struct RunCommand {
  std::filesystem::path config;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  int runs = 1;
  /// "dotted.key=value"; the value is parsed as JSON, falling back to a string.
  std::vector<std::string> overrides;
  RunDependencies deps;  // test hooks
};

struct AnalyzeCommand {
  std::filesystem::path input;  // run directory, events.jsonl or snapshot.json
  std::filesystem::path out_dir;  // empty: <run dir>/analysis
};

struct CompareCommand {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output;  // empty: stdout
};

struct EnrichCommand {
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> config;  // llm settings; defaults otherwise
  std::shared_ptr<Transport> transport;         // test hook
};

/// Each command reports diagnostics on `err` and returns an exit code.
int cmd_run(const RunCommand& cmd, std::ostream& out, std::ostream& err);
int cmd_analyze(const AnalyzeCommand& cmd, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareCommand& cmd, std::ostream& out, std::ostream& err);
int cmd_enrich(const EnrichCommand& cmd, std::ostream& out, std::ostream& err);

/// Applies `dotted.key=value` overrides to a config document.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

}  // namespace socsim
