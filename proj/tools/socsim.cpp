// socsim command-line tool: run, analyze, compare, enrich-personas.

#include <iostream>

#include <CLI11.hpp>

#include "socsim/report.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Agent-based social network simulator"};
  app.require_subcommand(1);

  socsim::RunCommand run;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Execute one or more simulation runs");
  run_cmd->add_option("-c,--config", run.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--out", run.out_dir, "Output directory")->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_option("--runs", run.runs, "Independent runs with seeds seed, seed+1, ...")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--set", run.overrides, "Config override, key.path=value (repeatable)");

  socsim::AnalyzeCommand analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Recompute metrics and communities from artifacts");
  analyze_cmd->add_option("input", analyze.input, "Run directory, events.jsonl or snapshot.json")
      ->required()
      ->check(CLI::ExistingPath);
  analyze_cmd->add_option("-o,--out", analyze.out_dir, "Output directory (default <run>/analysis)");

  socsim::CompareCommand compare;
  auto* compare_cmd = app.add_subcommand("compare", "Aggregate summary CSVs by condition");
  compare_cmd->add_option("inputs", compare.inputs, "Summary CSV files")
      ->required()
      ->check(CLI::ExistingFile);
  compare_cmd->add_option("-o,--out", compare.output, "Output CSV (default stdout)");

  socsim::EnrichCommand enrich;
  std::string enrich_config;
  auto* enrich_cmd = app.add_subcommand("enrich-personas", "Add biographies and occupations");
  enrich_cmd->add_option("input", enrich.input, "Persona CSV")->required()->check(CLI::ExistingFile);
  enrich_cmd->add_option("-o,--out", enrich.output, "Output persona CSV")->required();
  enrich_cmd->add_option("-c,--config", enrich_config, "Run config supplying llm settings")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : socsim::kExitDataError;
  }

  if (*run_cmd) {
    if (*seed_opt) run.seed = seed;
    return socsim::cmd_run(run, std::cout, std::cerr);
  }
  if (*analyze_cmd) return socsim::cmd_analyze(analyze, std::cout, std::cerr);
  if (*compare_cmd) return socsim::cmd_compare(compare, std::cout, std::cerr);
  if (!enrich_config.empty()) enrich.config = enrich_config;
  return socsim::cmd_enrich(enrich, std::cout, std::cerr);
}
