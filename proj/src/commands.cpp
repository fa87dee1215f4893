#include "parley/commands.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "parley/features.hpp"
#include "parley/mock_client.hpp"
#include "parley/simulate.hpp"
#include "parley/util.hpp"

namespace parley {
namespace {

using ordered_json = nlohmann::ordered_json;

// Features the configured lexica can actually score.
std::vector<std::string> scoreable_features(const ScorerSet& scorers) {
  std::vector<std::string> features = {"length"};
  if (scorers.dictionary) {
    features.push_back("informal");
    features.push_back("affect");
  }
  if (scorers.age) features.push_back("age");
  if (scorers.gender) features.push_back("gender");
  if (scorers.topics) features.push_back("topic");
  return features;
}

// A feature can only enter a defaulted objective when its reference-side
// error of average is defined (nonzero reference mean).
bool reference_side_usable(const SampleTable& human, const std::string& feature) {
  const auto* samples = human.find(feature);
  if (samples == nullptr || samples->empty()) return false;
  if (samples->front().is_vector()) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(samples->front().vec.size());
    for (const auto& s : *samples) mean += s.vec;
    return mean.norm() > 0.0;
  }
  double mean = 0.0;
  for (const auto& s : *samples) mean += s.value;
  return mean != 0.0;
}

Objective build_objective(const PipelineConfig& config, const ScorerSet& scorers,
                          const SampleTable& human_samples, std::ostream& log) {
  Objective objective = config.objective;
  std::vector<std::string> available = scoreable_features(scorers);
  if (objective.weights.empty()) {
    std::vector<std::string> usable;
    for (const auto& feature : available) {
      if (reference_side_usable(human_samples, feature)) {
        usable.push_back(feature);
      } else {
        log << "optimize: feature '" << feature
            << "' scores zero on the reference corpus; dropped from the objective\n";
      }
    }
    available = std::move(usable);
    objective = Objective::uniform(available);
    objective.axis_weights = config.objective.axis_weights;
  }
  if (objective.axis_weights.empty()) {
    // Built-in study axes judged by their own target feature.
    auto has = [&](const std::string& f) {
      return std::find(available.begin(), available.end(), f) != available.end();
    };
    if (has("informal")) objective.axis_weights["formality"] = {{"informal", 1.0}};
    if (has("length")) objective.axis_weights["length"] = {{"length", 1.0}};
    if (has("affect")) objective.axis_weights["affect"] = {{"affect", 1.0}};
    if (has("topic")) objective.axis_weights["topic"] = {{"topic", 1.0}};
    if (has("age") && has("gender")) {
      objective.axis_weights["demographics"] = {{"age", 1.0}, {"gender", 1.0}};
    }
  }
  return objective;
}

Corpus load_normalized_corpus(const PipelineConfig& config) {
  const std::filesystem::path path = corpus_artifact(config);
  if (!std::filesystem::exists(path)) {
    throw ConfigError("normalized corpus not found at " + path.string() + "; run ingest first");
  }
  return load_corpus(path, CorpusFormat::jsonl);
}

std::vector<PersonaPair> pairs_from_corpus(const Corpus& corpus,
                                           const std::vector<PersonaFeatures>& personas,
                                           int limit) {
  std::map<std::string, const PersonaFeatures*> by_speaker;
  for (const auto& p : personas) by_speaker[p.speaker_id] = &p;
  std::vector<PersonaPair> pairs;
  for (const auto& conv : corpus.conversations) {
    if (limit > 0 && pairs.size() >= static_cast<std::size_t>(limit)) break;
    if (conv.participants.size() != 2) continue;
    auto a = by_speaker.find(conv.participants[0]);
    auto b = by_speaker.find(conv.participants[1]);
    if (a == by_speaker.end() || b == by_speaker.end()) {
      throw ConfigError("no persona for conversation '" + conv.conversation_id + "'");
    }
    pairs.push_back(PersonaPair{*a->second, *b->second, conv.conversation_id});
  }
  return pairs;
}

std::string format_value(const std::optional<double>& value) {
  if (!value) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << *value;
  return out.str();
}

std::string format_number(double value) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << value;
  return out.str();
}

}  // namespace

std::unique_ptr<ChatClient> make_chat_client(const PipelineConfig& config) {
  if (config.use_mock) {
    return std::make_unique<MockChatClient>(config.seed);
  }
  return std::make_unique<HttpChatClient>(config.backend);
}

std::filesystem::path corpus_artifact(const PipelineConfig& config) {
  return config.output_dir / "corpus.jsonl";
}

std::filesystem::path persona_artifact(const PipelineConfig& config) {
  return config.output_dir / "personas.jsonl";
}

std::string render_report_table(const MetricReport& report, std::optional<Level> level) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"feature", "level", "mean_ref", "mean_gen", "std_ref", "std_gen", "avg_err",
                  "err_avg", "err_disp"});
  for (const auto& fm : report.features) {
    if (level && fm.level != *level) continue;
    rows.push_back({fm.feature, to_string(fm.level), format_number(fm.reference.mean),
                    format_number(fm.generated.mean), format_number(fm.reference.stddev),
                    format_number(fm.generated.stddev), format_value(fm.average_error),
                    format_value(fm.error_of_average), format_value(fm.error_of_dispersion)});
  }

  std::vector<std::size_t> widths(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::ostringstream out;
  if (!report.variant_key.empty()) out << "variants: " << report.variant_key << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i + 1 < rows[r].size()) {
        out << std::left << std::setw(static_cast<int>(widths[i])) << rows[r][i] << "  ";
      } else {
        out << rows[r][i];
      }
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w;
      out << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

int cmd_ingest(const PipelineConfig& config, std::ostream& log) {
  const Corpus raw = load_corpus(config.corpus.path, config.corpus.format);
  FilterSummary summary;
  const Corpus filtered = filter_complete(raw, &summary);
  write_corpus_jsonl(filtered, corpus_artifact(config));

  ordered_json j;
  j["loaded_conversations"] = raw.conversations.size();
  j["loaded_speakers"] = raw.speakers.size();
  j["retained_conversations"] = summary.retained;
  j["retained_speakers"] = filtered.speakers.size();
  j["dropped_conversations"] = summary.dropped;
  j["drop_reasons"] = ordered_json::object();
  for (const auto& [reason, count] : summary.drop_reasons) j["drop_reasons"][reason] = count;
  write_file(config.output_dir / "ingest_summary.json", j.dump(2) + "\n");

  log << "ingest: retained " << summary.retained << "/" << raw.conversations.size()
      << " conversations, " << filtered.speakers.size() << " speakers -> "
      << corpus_artifact(config).string() << '\n';
  return kExitOk;
}

int cmd_extract(const PipelineConfig& config, std::ostream& log) {
  const Corpus corpus = load_normalized_corpus(config);

  std::set<std::string> corpus_speakers;
  for (const auto& [id, record] : corpus.speakers) corpus_speakers.insert(id);

  std::unique_ptr<ChatClient> client = make_chat_client(config);

  // The cache is only valid for the same speakers under the same window and
  // backend; anything else re-pays the summarization.
  ordered_json meta;
  meta["window_start"] = config.window_start;
  meta["window_end"] = config.window_end;
  meta["backend"] = client->id();
  meta["speakers"] = corpus_speakers.size();
  const std::string meta_text = meta.dump(2) + "\n";
  const std::filesystem::path cache_path = persona_artifact(config);
  const std::filesystem::path meta_path = config.output_dir / "personas_meta.json";

  bool cache_hit = false;
  std::vector<PersonaFeatures> personas;
  if (std::filesystem::exists(cache_path) && std::filesystem::exists(meta_path) &&
      read_file(meta_path) == meta_text) {
    std::vector<PersonaFeatures> cached = load_persona_cache(cache_path);
    std::set<std::string> cached_speakers;
    for (const auto& p : cached) cached_speakers.insert(p.speaker_id);
    if (cached_speakers == corpus_speakers) {
      personas = std::move(cached);
      cache_hit = true;
    }
  }

  long backend_calls = 0;
  if (!cache_hit) {
    CountingChatClient counting(*client);
    ExtractOptions options;
    options.window_start = config.window_start;
    options.window_end = config.window_end;
    options.parallelism = config.workers;
    personas = extract_personas(corpus, counting, options);
    backend_calls = counting.calls();
    write_persona_cache(personas, cache_path);
    write_file(meta_path, meta_text);
  }

  ordered_json j;
  j["personas"] = personas.size();
  j["backend_calls"] = backend_calls;
  j["cache_hit"] = cache_hit;
  write_file(config.output_dir / "extract_summary.json", j.dump(2) + "\n");

  log << "extract: " << personas.size() << " personas (" << (cache_hit ? "cache hit" : "fresh")
      << ", " << backend_calls << " backend calls) -> " << cache_path.string() << '\n';
  return kExitOk;
}

int cmd_simulate(const PipelineConfig& config, const std::filesystem::path& variants_file,
                 std::ostream& log) {
  const Corpus corpus = load_normalized_corpus(config);
  const std::vector<PersonaFeatures> personas = load_persona_cache(persona_artifact(config));
  const std::vector<PersonaPair> pairs = pairs_from_corpus(corpus, personas, config.budget.pairs);
  if (pairs.empty()) throw ConfigError("no persona pairs to simulate");

  PromptVariantSet variants = PromptVariantSet::baseline(config.prompts.axes());
  if (!variants_file.empty()) {
    ordered_json j;
    try {
      j = ordered_json::parse(read_file(variants_file));
    } catch (const std::exception& e) {
      throw ConfigError("cannot read variants file: " + std::string(e.what()));
    }
    const ordered_json& choices = j.contains("variants") ? j["variants"] : j;
    for (const auto& [axis, id] : choices.items()) {
      variants.choose(axis, id.get<std::string>());
    }
  }

  std::unique_ptr<ChatClient> client = make_chat_client(config);
  BatchOptions options;
  options.conversations_per_pair = config.budget.replicates;
  options.turns = config.budget.turns;
  options.master_seed = config.seed;
  options.workers = config.workers;
  options.min_success_fraction = config.min_success_fraction;
  options.record_timestamps = !config.use_mock;

  const DialogueSet dialogues = run_batch(pairs, variants, config.prompts, *client, options);
  write_dialogue_set(dialogues, config.output_dir / "dialogues.jsonl",
                     config.output_dir / "dialogues_manifest.json");

  log << "simulate: " << dialogues.conversations.size() << " conversations ("
      << dialogues.truncated_count() << " truncated), variants '" << variants.key() << "' -> "
      << (config.output_dir / "dialogues.jsonl").string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const PipelineConfig& config, const std::filesystem::path& corpus_path,
                 const std::filesystem::path& dialogues_path,
                 const std::filesystem::path& manifest_path, std::ostream& log) {
  const std::filesystem::path corpus_file =
      corpus_path.empty() ? corpus_artifact(config) : corpus_path;
  const std::filesystem::path turns_file =
      dialogues_path.empty() ? config.output_dir / "dialogues.jsonl" : dialogues_path;
  const std::filesystem::path manifest_file =
      manifest_path.empty() ? config.output_dir / "dialogues_manifest.json" : manifest_path;

  const Corpus corpus = load_corpus(corpus_file, CorpusFormat::jsonl);
  const DialogueSet dialogues = load_dialogue_set(turns_file, manifest_file);
  const ScorerSet scorers = load_scorers(config);

  const SampleTable human = score_conversations(corpus.conversations, scorers);
  const SampleTable generated =
      score_conversations(dialogues.to_conversations(config.exclude_truncated), scorers);
  MetricReport report = compare_tables(human, generated);
  if (!dialogues.conversations.empty()) {
    report.variant_key = dialogues.conversations.front().variant_key;
  }
  if (config.level) {
    std::vector<FeatureMetrics> kept;
    for (auto& fm : report.features) {
      if (fm.level == *config.level) kept.push_back(std::move(fm));
    }
    report.features = std::move(kept);
  }

  write_file(config.output_dir / "report.json", report.to_json() + "\n");
  write_file(config.output_dir / "report.csv", report.to_csv());
  log << render_report_table(report, config.level);
  return kExitOk;
}

int cmd_optimize(const PipelineConfig& config, bool resume, std::ostream& log) {
  const Corpus corpus = load_normalized_corpus(config);
  const std::vector<PersonaFeatures> personas = load_persona_cache(persona_artifact(config));
  const ScorerSet scorers = load_scorers(config);

  EvalContext context = EvalContext::prepare(corpus, personas, scorers, config.prompts,
                                             config.budget, config.seed, config.workers);
  context.min_success_fraction = config.min_success_fraction;
  context.exclude_truncated = config.exclude_truncated;
  const Objective objective = build_objective(config, scorers, context.human_samples, log);

  std::unique_ptr<ChatClient> client = make_chat_client(config);

  OptimizeOptions options;
  options.epsilon = config.epsilon;
  options.max_evaluations = config.max_evaluations;
  options.trace_path = config.output_dir / "trace.jsonl";
  if (resume) options.resume_path = options.trace_path;

  const OptimizationState state = optimize(config.prompts, context, *client, objective, options);

  ordered_json best;
  best["variants"] = ordered_json::object();
  for (const auto& [axis, id] : state.best_variants.choices()) best["variants"][axis] = id;
  best["objective"] = state.best_score;
  best["passes"] = state.passes;
  best["evaluations"] = state.evaluations;
  best["reused_evaluations"] = state.reused_evaluations;
  best["budget_exhausted"] = state.budget_exhausted;
  write_file(config.output_dir / "best_prompts.json", best.dump(2) + "\n");

  write_dialogue_set(state.best_dialogues, config.output_dir / "dialogues_best.jsonl",
                     config.output_dir / "dialogues_best_manifest.json");

  if (!state.trace.empty()) {
    write_file(config.output_dir / "report_baseline.json",
               state.trace.front().report.to_json() + "\n");
  }
  for (auto it = state.trace.rbegin(); it != state.trace.rend(); ++it) {
    if (it->variants.key() == state.best_variants.key()) {
      write_file(config.output_dir / "report_best.json", it->report.to_json() + "\n");
      write_file(config.output_dir / "report_best.csv", it->report.to_csv());
      break;
    }
  }

  log << "optimize: best variants '" << state.best_variants.key() << "' objective "
      << state.best_score << " after " << state.evaluations << " evaluations ("
      << state.reused_evaluations << " reused, " << state.passes << " passes)"
      << (state.budget_exhausted ? " [budget exhausted]" : "") << '\n';
  return kExitOk;
}

int cmd_report(const std::vector<std::filesystem::path>& report_files,
               std::optional<Level> level, std::ostream& out) {
  if (report_files.empty()) {
    throw ConfigError("report: no report files given");
  }
  for (const auto& path : report_files) {
    std::string text;
    try {
      text = read_file(path);
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
    MetricReport report;
    try {
      report = MetricReport::from_json_text(text);
    } catch (const MetricError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    out << path.string() << ":\n" << render_report_table(report, level) << '\n';
  }
  return kExitOk;
}

}  // namespace parley
