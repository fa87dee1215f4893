#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "parley/chat_client.hpp"
#include "parley/corpus.hpp"
#include "parley/lexica.hpp"
#include "parley/optimize.hpp"
#include "parley/prompts.hpp"

namespace parley {

// One structured config document drives every subcommand. String values may
// reference credentials and hosts as ${ENV_VAR}; relative paths resolve
// against the config file's directory.
struct PipelineConfig {
  struct CorpusSource {
    std::filesystem::path path;
    CorpusFormat format = CorpusFormat::jsonl;
  } corpus;

  struct LexicaPaths {
    std::filesystem::path age;         // weighted lexicon CSV
    std::filesystem::path gender;      // weighted lexicon CSV
    std::filesystem::path dictionary;  // LIWC-style .dic
    std::filesystem::path topics;      // topic lexicon CSV
    std::string affect_category = "affect";
    std::string informal_category = "informal";
    int topic_count = 0;  // 0 = inferred from the file
  } lexica;

  BackendConfig backend;
  bool use_mock = false;

  PromptRegistry prompts = PromptRegistry::defaults();
  EvalBudget budget;
  Objective objective;  // empty weights = uniform over scoreable features

  int window_start = 51;
  int window_end = 70;
  std::uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path output_dir = "out";
  double min_success_fraction = 1.0;
  bool exclude_truncated = true;
  double epsilon = 1e-3;
  int max_evaluations = 0;
  std::optional<Level> level;  // restrict reports to one level
};

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json_text(const std::string& text,
                                     const std::filesystem::path& base_dir);

// Loads every lexicon named in the config; unset paths leave that scorer out.
ScorerSet load_scorers(const PipelineConfig& config);

}  // namespace parley
