#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "parley/commands.hpp"

namespace {

struct GlobalOverrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::string backend_endpoint;
  bool mock = false;
  std::string level;
};

parley::PipelineConfig load_with_overrides(const GlobalOverrides& overrides) {
  parley::PipelineConfig config = parley::load_config(overrides.config_path);
  if (overrides.seed) config.seed = *overrides.seed;
  if (!overrides.output_dir.empty()) config.output_dir = overrides.output_dir;
  if (!overrides.backend_endpoint.empty()) config.backend.endpoint = overrides.backend_endpoint;
  if (overrides.mock) config.use_mock = true;
  if (overrides.level == "turn") config.level = parley::Level::turn;
  if (overrides.level == "speaker") config.level = parley::Level::speaker;
  return config;
}

void add_common_options(CLI::App* cmd, GlobalOverrides& overrides) {
  cmd->add_option("--config", overrides.config_path, "pipeline config JSON")->required();
  cmd->add_option("--seed", overrides.seed, "override the master seed");
  cmd->add_option("--output-dir", overrides.output_dir, "override the output directory");
  cmd->add_option("--backend", overrides.backend_endpoint, "override the backend endpoint");
  cmd->add_flag("--mock", overrides.mock, "force the deterministic mock backend");
  cmd->add_option("--level", overrides.level, "restrict reports to one level")
      ->check(CLI::IsMember({"turn", "speaker"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diverse simulated-user chatbot pipeline"};
  app.require_subcommand(1);

  GlobalOverrides overrides;
  std::string variants_file;
  std::string eval_corpus;
  std::string eval_dialogues;
  std::string eval_manifest;
  bool resume = false;
  std::vector<std::string> report_files;
  std::string report_level;

  CLI::App* ingest = app.add_subcommand("ingest", "load, validate, filter and normalize a corpus");
  add_common_options(ingest, overrides);

  CLI::App* extract = app.add_subcommand("extract", "extract persona features per speaker");
  add_common_options(extract, overrides);

  CLI::App* simulate = app.add_subcommand("simulate", "generate bot-vs-bot conversations");
  add_common_options(simulate, overrides);
  simulate->add_option("--variants", variants_file, "JSON file of axis -> variant choices");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score human vs generated dialogue");
  add_common_options(evaluate, overrides);
  evaluate->add_option("--corpus-file", eval_corpus, "normalized corpus JSONL");
  evaluate->add_option("--dialogues", eval_dialogues, "dialogue turns JSONL");
  evaluate->add_option("--manifest", eval_manifest, "dialogue manifest JSON");

  CLI::App* optimize = app.add_subcommand("optimize", "search prompt variants for the best set");
  add_common_options(optimize, overrides);
  optimize->add_flag("--resume", resume, "reuse evaluations from the existing trace");

  CLI::App* report = app.add_subcommand("report", "render report JSON as tables");
  report->add_option("files", report_files, "report JSON files")->required();
  report->add_option("--level", report_level, "restrict to one level")
      ->check(CLI::IsMember({"turn", "speaker"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::optional<parley::Level> level;
      if (report_level == "turn") level = parley::Level::turn;
      if (report_level == "speaker") level = parley::Level::speaker;
      std::vector<std::filesystem::path> paths(report_files.begin(), report_files.end());
      return parley::cmd_report(paths, level, std::cout);
    }

    const parley::PipelineConfig config = load_with_overrides(overrides);
    if (ingest->parsed()) return parley::cmd_ingest(config, std::cout);
    if (extract->parsed()) return parley::cmd_extract(config, std::cout);
    if (simulate->parsed()) return parley::cmd_simulate(config, variants_file, std::cout);
    if (evaluate->parsed()) {
      return parley::cmd_evaluate(config, eval_corpus, eval_dialogues, eval_manifest, std::cout);
    }
    if (optimize->parsed()) return parley::cmd_optimize(config, resume, std::cout);
  } catch (const parley::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return parley::kExitConfigError;
  } catch (const parley::BatchError& e) {
    std::cerr << "batch failure: " << e.what() << '\n';
    return parley::kExitPartialBatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return parley::kExitRuntimeError;
  }
  return parley::kExitRuntimeError;
}
