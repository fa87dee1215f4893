#include "parley/config.hpp"

#include <nlohmann/json.hpp>

#include "parley/util.hpp"

namespace parley {
namespace {

using ordered_json = nlohmann::ordered_json;

// Expands ${ENV} in every string value, in place.
void interpolate_strings(ordered_json& j) {
  if (j.is_string()) {
    try {
      j = interpolate_env(j.get<std::string>());
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  } else if (j.is_object() || j.is_array()) {
    for (auto& child : j) interpolate_strings(child);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& path) {
  if (path.empty() || path.is_absolute()) return path;
  return base / path;
}

void require_exists(const std::filesystem::path& path, const std::string& what) {
  if (!path.empty() && !std::filesystem::exists(path)) {
    throw ConfigError(what + " does not exist: " + path.string());
  }
}

}  // namespace

PipelineConfig config_from_json_text(const std::string& text,
                                     const std::filesystem::path& base_dir) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  interpolate_strings(j);

  PipelineConfig config;
  try {
    if (j.contains("corpus")) {
      const auto& c = j["corpus"];
      config.corpus.path = resolve(base_dir, c.value("path", ""));
      const std::string format = c.value("format", "jsonl");
      if (format == "jsonl") {
        config.corpus.format = CorpusFormat::jsonl;
      } else if (format == "csv-dir") {
        config.corpus.format = CorpusFormat::csv_dir;
      } else {
        throw ConfigError("unknown corpus format: '" + format + "'");
      }
    }
    if (j.contains("lexica")) {
      const auto& l = j["lexica"];
      config.lexica.age = resolve(base_dir, l.value("age", ""));
      config.lexica.gender = resolve(base_dir, l.value("gender", ""));
      config.lexica.dictionary = resolve(base_dir, l.value("dictionary", ""));
      config.lexica.topics = resolve(base_dir, l.value("topics", ""));
      config.lexica.affect_category = l.value("affect_category", "affect");
      config.lexica.informal_category = l.value("informal_category", "informal");
      config.lexica.topic_count = l.value("topic_count", 0);
    }
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      config.backend.endpoint = b.value("endpoint", "");
      config.backend.model = b.value("model", "");
      config.backend.temperature = b.value("temperature", 1.0);
      config.backend.max_tokens = b.value("max_tokens", 256);
      config.backend.api_key_env = b.value("api_key_env", "");
      if (b.contains("retry")) {
        const auto& r = b["retry"];
        config.backend.retry.max_attempts = r.value("max_attempts", 4);
        config.backend.retry.base_delay =
            std::chrono::milliseconds(r.value("base_delay_ms", 250));
        config.backend.retry.max_delay = std::chrono::milliseconds(r.value("max_delay_ms", 8000));
        config.backend.retry.jitter = r.value("jitter", 0.25);
      }
      if (b.contains("rate_limit")) {
        const auto& r = b["rate_limit"];
        config.backend.rate_limit.requests_per_second = r.value("requests_per_second", 0.0);
        config.backend.rate_limit.burst = r.value("burst", 1);
        config.backend.rate_limit.max_concurrency = r.value("max_concurrency", 4);
      }
    }
    config.use_mock = j.value("mock", false);

    if (j.contains("prompts")) {
      const auto& p = j["prompts"];
      if (p.contains("axes_file")) {
        const std::filesystem::path axes_path = resolve(base_dir, p["axes_file"].get<std::string>());
        require_exists(axes_path, "prompt axes file");
        config.prompts = PromptRegistry::from_json_file(axes_path);
      } else if (!p.empty()) {
        config.prompts = PromptRegistry::from_json_text(p.dump());
      }
    }
    if (j.contains("budget")) {
      const auto& b = j["budget"];
      config.budget.pairs = b.value("pairs", 0);
      config.budget.replicates = b.value("replicates", 1);
      config.budget.turns = b.value("turns", 64);
    }
    if (j.contains("objective")) {
      const auto& o = j["objective"];
      if (o.contains("weights")) {
        for (const auto& [feature, w] : o["weights"].items()) {
          config.objective.weights[feature] = w.get<double>();
        }
      }
      if (o.contains("axis_weights")) {
        for (const auto& [axis, ws] : o["axis_weights"].items()) {
          for (const auto& [feature, w] : ws.items()) {
            config.objective.axis_weights[axis][feature] = w.get<double>();
          }
        }
      }
    }
    if (j.contains("window")) {
      config.window_start = j["window"].value("start", 51);
      config.window_end = j["window"].value("end", 70);
    }
    config.seed = j.value("seed", std::uint64_t{0});
    config.workers = j.value("workers", 1);
    if (j.contains("output_dir")) {
      config.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    } else {
      config.output_dir = resolve(base_dir, "out");
    }
    config.min_success_fraction = j.value("min_success_fraction", 1.0);
    config.exclude_truncated = j.value("exclude_truncated", true);
    config.epsilon = j.value("epsilon", 1e-3);
    config.max_evaluations = j.value("max_evaluations", 0);
    if (j.contains("level")) {
      const std::string level = j["level"].get<std::string>();
      if (level == "turn") {
        config.level = Level::turn;
      } else if (level == "speaker") {
        config.level = Level::speaker;
      } else if (!level.empty()) {
        throw ConfigError("unknown level: '" + level + "' (expected turn or speaker)");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }

  // Validation: fail before any work starts.
  if (config.corpus.path.empty()) {
    throw ConfigError("config is missing corpus.path");
  }
  require_exists(config.corpus.path, "corpus path");
  require_exists(config.lexica.age, "age lexicon");
  require_exists(config.lexica.gender, "gender lexicon");
  require_exists(config.lexica.dictionary, "category dictionary");
  require_exists(config.lexica.topics, "topic lexicon");
  if (config.budget.turns < 2 || config.budget.turns % 2 != 0) {
    throw ConfigError("budget.turns must be even and >= 2");
  }
  if (config.budget.replicates <= 0) {
    throw ConfigError("budget.replicates must be positive");
  }
  if (config.budget.pairs < 0) {
    throw ConfigError("budget.pairs must be non-negative");
  }
  if (config.workers < 1) {
    throw ConfigError("workers must be >= 1");
  }
  if (config.window_start < 1 || config.window_end < config.window_start) {
    throw ConfigError("window must satisfy 1 <= start <= end");
  }
  if (config.min_success_fraction < 0.0 || config.min_success_fraction > 1.0) {
    throw ConfigError("min_success_fraction must be within [0,1]");
  }
  if (!config.use_mock && config.backend.endpoint.empty()) {
    throw ConfigError("backend.endpoint is required unless mock is enabled");
  }
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file does not exist: " + path.string());
  }
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  const std::filesystem::path base =
      path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return config_from_json_text(text, base);
}

ScorerSet load_scorers(const PipelineConfig& config) {
  ScorerSet scorers;
  if (!config.lexica.age.empty()) {
    scorers.age = load_weighted_lexicon_csv(config.lexica.age, "age");
  }
  if (!config.lexica.gender.empty()) {
    scorers.gender = load_weighted_lexicon_csv(config.lexica.gender, "gender");
  }
  if (!config.lexica.dictionary.empty()) {
    scorers.dictionary = CategoryDictionary::load_dic(config.lexica.dictionary);
    scorers.affect_category = config.lexica.affect_category;
    scorers.informal_category = config.lexica.informal_category;
    for (const std::string& category : {scorers.affect_category, scorers.informal_category}) {
      if (!scorers.dictionary->has_category(category)) {
        throw ConfigError("dictionary lacks configured category '" + category + "'");
      }
    }
  }
  if (!config.lexica.topics.empty()) {
    scorers.topics = load_topic_lexicon_csv(config.lexica.topics, config.lexica.topic_count);
  }
  return scorers;
}

}  // namespace parley
