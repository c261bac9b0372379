#include "socsim/report.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "socsim/csv.hpp"
#include "socsim/errors.hpp"
#include "socsim/events.hpp"
#include "socsim/ingestion.hpp"
#include "socsim/templates.hpp"

namespace socsim {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

std::vector<std::string> summary_columns() {
  std::vector<std::string> cols = {"schema_version", "condition", "seed", "config_hash"};
  for (const auto& [name, unused] : RunSummary{}.fields()) cols.emplace_back(name);
  return cols;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  csv::write_row(out, summary_columns());
  for (const auto& r : rows) {
    csv::Row row = {std::to_string(r.schema_version), r.condition, std::to_string(r.seed), r.config_hash};
    for (const auto& [name, value] : r.summary.fields()) row.push_back(value ? format_number(*value) : "");
    csv::write_row(out, row);
  }
  return out.str();
}

std::vector<SummaryRow> parse_summary_csv(std::istream& in, const std::string& source) {
  std::size_t line = 0;
  const auto header = csv::read_row(in, line);
  if (!header) throw DataError(source + ": empty summary file");
  const auto expected = summary_columns();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header->size(); ++i) {
    const auto& col = (*header)[i];
    if (std::find(expected.begin(), expected.end(), col) == expected.end()) {
      throw DataError(source + ": unknown summary column '" + col + "'", line);
    }
    index[col] = i;
  }
  for (const char* required : {"schema_version", "condition"}) {
    if (!index.count(required)) {
      throw DataError(source + ": missing summary column '" + required + "'", line);
    }
  }

  std::vector<SummaryRow> rows;
  while (auto row = csv::read_row(in, line)) {
    if (row->size() == 1 && (*row)[0].empty()) continue;
    if (row->size() != header->size()) {
      throw DataError(source + ": line " + std::to_string(line) + " has " +
                          std::to_string(row->size()) + " fields, expected " +
                          std::to_string(header->size()),
                      line);
    }
    SummaryRow r;
    auto number = [&](const std::string& col, const std::string& text) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != text.size()) {
        throw DataError(source + ": line " + std::to_string(line) + ": bad number '" + text +
                            "' in column " + col,
                        line);
      }
      return v;
    };
    for (const auto& [col, i] : index) {
      const auto& cell = (*row)[i];
      if (col == "schema_version") {
        r.schema_version = static_cast<int>(number(col, cell));
      } else if (col == "condition") {
        r.condition = cell;
      } else if (col == "seed") {
        if (!cell.empty()) r.seed = static_cast<std::uint64_t>(std::stoull(cell));
      } else if (col == "config_hash") {
        r.config_hash = cell;
      } else if (!cell.empty()) {
        *r.summary.field(col) = number(col, cell);
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryRow> read_summary_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_summary_csv(in, path.string());
}

std::string communities_csv(const PlatformState& state, const std::vector<int>& communities) {
  std::ostringstream out;
  csv::write_row(out, {"user_id", "user_index", "party", "partisanship", "community"});
  for (std::size_t i = 0; i < state.personas.size(); ++i) {
    const auto& p = state.personas[i];
    csv::write_row(out, {p.user_id, std::to_string(i), std::string(to_string(p.party)),
                         std::to_string(p.partisanship), std::to_string(communities.at(i))});
  }
  return out.str();
}

std::string compare_csv(const std::vector<SummaryRow>& rows) {
  if (rows.empty()) throw ArgumentError("compare needs at least one summary");
  std::set<int> versions;
  std::map<std::string, std::vector<RunSummary>> by_condition;
  for (const auto& r : rows) {
    versions.insert(r.schema_version);
    by_condition[r.condition].push_back(r.summary);
  }
  if (versions.size() > 1) {
    throw DataError("summaries mix schema versions " + std::to_string(*versions.begin()) + " and " +
                    std::to_string(*versions.rbegin()));
  }
  if (*versions.begin() != kSummarySchemaVersion) {
    throw DataError("unsupported summary schema_version " + std::to_string(*versions.begin()));
  }
  bool with_se = false;
  for (const auto& [c, runs] : by_condition) with_se = with_se || runs.size() >= 2;

  const auto aggregates = aggregate_conditions(by_condition);
  std::ostringstream out;
  csv::Row header = {"condition", "n_runs"};
  std::vector<std::string_view> names;
  for (const auto& [name, unused] : RunSummary{}.fields()) {
    names.push_back(name);
    header.push_back(std::string(name) + "_mean");
    if (with_se) header.push_back(std::string(name) + "_se");
  }
  csv::write_row(out, header);
  for (const auto& [condition, fields] : aggregates) {
    csv::Row row = {condition, std::to_string(by_condition.at(condition).size())};
    for (const auto name : names) {
      const auto it = fields.find(std::string(name));
      row.push_back(it == fields.end() ? "" : format_number(it->second.mean));
      if (with_se) {
        row.push_back(it == fields.end() || !it->second.se ? "" : format_number(*it->second.se));
      }
    }
    csv::write_row(out, row);
  }
  return out.str();
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + o + "' is not of the form key=value");
    }
    const auto key = o.substr(0, eq);
    const auto text = o.substr(eq + 1);
    auto value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("override '" + o + "' has an empty key segment");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      if (!node->is_null() && !node->is_object()) {
        throw ConfigError("override '" + o + "': '" + part + "' is not an object");
      }
      start = dot + 1;
    }
  }
}

namespace {

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

SummaryRow row_for(const RunConfig& config, const std::string& hash, const RunSummary& summary) {
  return {kSummarySchemaVersion, config.intervention, config.seed, hash, summary};
}

PromptTemplates templates_for(const RunConfig& config) {
  return config.data.templates_dir.empty() ? PromptTemplates::defaults()
                                           : PromptTemplates::load(config.resolve(config.data.templates_dir));
}

}  // namespace

int cmd_run(const RunCommand& cmd, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cmd.runs < 1) throw ConfigError("--runs must be at least 1");
    if (!fs::is_regular_file(cmd.config)) throw ConfigError("no config file at " + cmd.config.string());
    auto doc = json::parse(read_file(cmd.config), nullptr, false);
    if (doc.is_discarded()) throw ConfigError(cmd.config.string() + ": not valid JSON");
    apply_overrides(doc, cmd.overrides);
    if (cmd.seed) doc["seed"] = *cmd.seed;
    auto base = RunConfig::from_json(doc);
    base.base_dir = cmd.config.parent_path();
    // Missing inputs are data errors, not runtime failures.
    for (const auto* input : {&base.data.personas_path, &base.data.news_path, &base.data.templates_dir}) {
      if (!input->empty() && !fs::exists(base.resolve(*input))) {
        throw DataError("input not found: " + base.resolve(*input).string());
      }
    }
    const auto template_hash = templates_for(base).hash();

    std::vector<SummaryRow> all;
    for (int r = 0; r < cmd.runs; ++r) {
      RunConfig config = base;
      config.seed = base.seed + static_cast<std::uint64_t>(r);
      const fs::path dir = cmd.runs == 1 ? cmd.out_dir : cmd.out_dir / ("seed_" + std::to_string(config.seed));
      RunDependencies deps = cmd.deps;
      if (!deps.log) deps.log = [&err](const std::string& m) { err << "warning: " << m << '\n'; };

      const auto started = std::chrono::steady_clock::now();
      const auto started_at = now_utc();
      const auto result = run(config, dir, deps);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

      const auto row = row_for(config, result.config_hash, result.summary);
      write_file_atomic(dir / "summary.csv", summary_csv({row}));
      json undefined = json::object();
      for (const auto& [k, v] : result.summary.undefined) undefined[k] = v;
      const json manifest = {
          {"schema_version", kSummarySchemaVersion},
          {"config_hash", result.config_hash},
          {"template_hash", template_hash},
          {"model", config.backend.kind == "llm" ? config.llm.agent.model : std::string("stub")},
          {"seed", config.seed},
          {"condition", config.intervention},
          {"started_at", started_at},
          {"wall_time_seconds", wall},
          {"n_steps", config.n_steps},
          {"personas_with_replacement", result.personas_with_replacement},
          {"llm_usage",
           {{"requests", result.llm_usage.requests},
            {"cache_hits", result.llm_usage.cache_hits},
            {"network_calls", result.llm_usage.network_calls},
            {"prompt_tokens", result.llm_usage.prompt_tokens},
            {"completion_tokens", result.llm_usage.completion_tokens}}},
          {"warnings", result.warnings},
          {"undefined_metrics", undefined},
          {"metric_notes",
           {{"share_follow", "percent of non-skip steps whose action carried a follow"},
            {"ei_index", "directed follow edges between Democrats and Republicans; edges touching "
                         "non-partisan users are dropped and counted in ei_dropped_edges"},
            {"gini_reposts", "over per-post repost counts"}}},
          {"config", config.to_json()},
      };
      write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
      out << "run " << config.intervention << " seed " << config.seed << " -> " << dir.string()
          << " (" << format_number(wall) << " s)\n";
      all.push_back(row);
    }
    if (cmd.runs > 1) write_file_atomic(cmd.out_dir / "summary.csv", summary_csv(all));
    return kExitOk;
  });
}

int cmd_analyze(const AnalyzeCommand& cmd, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    fs::path dir, events_path, snapshot_path;
    if (fs::is_directory(cmd.input)) {
      dir = cmd.input;
      events_path = dir / "events.jsonl";
      snapshot_path = dir / "snapshot.json";
      if (!fs::exists(events_path) && !fs::exists(snapshot_path)) {
        throw DataError(dir.string() + " holds neither events.jsonl nor snapshot.json");
      }
      if (!fs::exists(events_path)) events_path.clear();
    } else if (cmd.input.extension() == ".jsonl") {
      dir = cmd.input.parent_path();
      events_path = cmd.input;
    } else {
      dir = cmd.input.parent_path();
      snapshot_path = cmd.input;
    }

    std::optional<json> manifest;
    if (const auto m = dir / "manifest.json"; fs::exists(m)) {
      manifest = json::parse(read_file(m), nullptr, false);
      if (manifest->is_discarded() || !manifest->contains("config_hash")) {
        throw DataError(m.string() + ": not a run manifest");
      }
    }
    auto check_hash = [&](const std::string& hash, const std::string& what) {
      if (manifest && (*manifest)["config_hash"].get<std::string>() != hash) {
        throw DataError(what + " config hash " + hash + " does not match manifest " +
                        (*manifest)["config_hash"].get<std::string>());
      }
    };

    SummaryRow row;
    PlatformState state;
    if (!events_path.empty()) {
      const auto log = read_event_log(events_path);
      check_hash(log.config_hash, events_path.string());
      state = replay_events(log.personas, log.events);
      if (!snapshot_path.empty() && fs::exists(snapshot_path)) {
        std::string snap_hash;
        const auto snap = read_snapshot(snapshot_path, &snap_hash);
        if (snap_hash != log.config_hash) {
          throw DataError(snapshot_path.string() + " config hash does not match the event log");
        }
        if (snap.step == state.step && !snap.same_content(state)) {
          throw DataError(snapshot_path.string() + " disagrees with the replayed event log");
        }
      }
      row = {kSummarySchemaVersion, log.condition, log.seed, log.config_hash,
             summarize_run(log.events, state)};
    } else {
      std::string hash;
      state = read_snapshot(snapshot_path, &hash);
      check_hash(hash, snapshot_path.string());
      row.config_hash = hash;
      if (manifest) {
        row.condition = manifest->value("condition", "");
        row.seed = manifest->value("seed", std::uint64_t{0});
      }
      row.summary = summarize_state(state);
    }
    for (const auto& problem : validate_state(state)) err << "warning: " << problem << '\n';

    const auto communities = label_propagation(state.personas.size(), state.follows, row.seed);
    const fs::path out_dir = cmd.out_dir.empty() ? dir / "analysis" : cmd.out_dir;
    fs::create_directories(out_dir);
    write_file_atomic(out_dir / "summary.csv", summary_csv({row}));
    write_file_atomic(out_dir / "communities.csv", communities_csv(state, communities));
    if (row.summary.ei_dropped_edges && *row.summary.ei_dropped_edges > 0) {
      err << "note: " << format_number(*row.summary.ei_dropped_edges)
          << " follow edges touching non-partisan users were left out of the E-I index\n";
    }
    out << summary_csv({row});
    return kExitOk;
  });
}

int cmd_compare(const CompareCommand& cmd, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cmd.inputs.empty()) throw ArgumentError("compare needs at least one summary CSV");
    std::vector<SummaryRow> rows;
    for (const auto& p : cmd.inputs) {
      auto part = read_summary_csv(p);
      rows.insert(rows.end(), part.begin(), part.end());
    }
    const auto text = compare_csv(rows);
    if (cmd.output.empty()) {
      out << text;
    } else {
      write_file_atomic(cmd.output, text);
    }
    return kExitOk;
  });
}

int cmd_enrich(const EnrichCommand& cmd, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig config;
    if (cmd.config) config = RunConfig::load(*cmd.config);
    auto personas = load_personas(cmd.input);

    LlmClientOptions opts;
    apply_llm_environment(opts);
    if (!config.llm.base_url.empty()) opts.base_url = config.llm.base_url;
    opts.mode = config.llm.mode;
    opts.cache_dir = config.resolve(config.llm.cache_dir);
    opts.retry.max_retries = config.llm.max_retries;
    opts.max_in_flight = config.llm.max_in_flight;
    LlmClient llm(opts, cmd.transport ? cmd.transport : std::make_shared<HttpTransport>());

    EnrichmentOptions eo;
    eo.model = config.llm.agent.model;
    eo.temperature = config.llm.agent.temperature;
    eo.max_tokens = config.llm.agent.max_tokens;
    eo.cache_dir = config.resolve(config.data.enrichment_cache_dir);
    eo.max_in_flight = config.llm.max_in_flight;
    PersonaEnricher enricher(llm, eo, templates_for(config));
    const auto batch = enrich_all(personas, enricher);
    write_personas(cmd.output, batch.personas);
    for (const auto& f : batch.failures) err << "warning: " << f << '\n';
    const auto usage = llm.usage_report();
    out << "enriched " << batch.personas.size() - batch.failures.size() << " of "
        << batch.personas.size() << " personas (" << usage.network_calls << " network calls, "
        << usage.cache_hits << " cache hits) -> " << cmd.output.string() << '\n';
    return batch.failures.empty() ? kExitOk : kExitRuntimeError;
  });
}

}  // namespace socsim
