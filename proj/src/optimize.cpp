#include "parley/optimize.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "parley/util.hpp"

namespace parley {
namespace {

using ordered_json = nlohmann::ordered_json;

std::map<std::string, double> normalized(const std::map<std::string, double>& weights) {
  double total = 0.0;
  for (const auto& [feature, w] : weights) {
    if (w < 0.0) {
      throw ConfigError("objective weight for '" + feature + "' is negative");
    }
    total += w;
  }
  if (total <= 0.0) {
    throw ConfigError("objective weights sum to zero");
  }
  std::map<std::string, double> out;
  for (const auto& [feature, w] : weights) {
    if (w > 0.0) out[feature] = w / total;
  }
  return out;
}

}  // namespace

Objective Objective::uniform(const std::vector<std::string>& features) {
  Objective obj;
  for (const auto& f : features) obj.weights[f] = 1.0;
  return obj;
}

double Objective::weighted_value(const MetricReport& report,
                                 const std::map<std::string, double>& weights) {
  double value = 0.0;
  for (const auto& [feature, w] : normalized(weights)) {
    const FeatureMetrics* fm = report.find(feature);
    if (fm == nullptr) {
      throw MetricError("objective feature '" + feature + "' missing from report");
    }
    if (!fm->error_of_average) {
      throw MetricError("error_of_average undefined for objective feature '" + feature + "'");
    }
    value += w * *fm->error_of_average;
  }
  return value;
}

double Objective::value(const MetricReport& report) const {
  return weighted_value(report, weights);
}

double Objective::value_for_axis(const MetricReport& report, const std::string& axis) const {
  auto it = axis_weights.find(axis);
  if (it == axis_weights.end()) return value(report);
  return weighted_value(report, it->second);
}

std::string Objective::canonical_text() const {
  ordered_json j;
  for (const auto& [feature, w] : weights) j["weights"][feature] = w;
  for (const auto& [axis, ws] : axis_weights) {
    for (const auto& [feature, w] : ws) j["axis_weights"][axis][feature] = w;
  }
  return j.dump();
}

EvalContext EvalContext::prepare(const Corpus& corpus, const std::vector<PersonaFeatures>& personas,
                                 const ScorerSet& scorers, const PromptRegistry& registry,
                                 const EvalBudget& budget, std::uint64_t master_seed, int workers) {
  if (budget.replicates <= 0) throw ConfigError("budget.replicates must be positive");
  if (budget.turns < 2 || budget.turns % 2 != 0) {
    throw ConfigError("budget.turns must be even and >= 2");
  }

  std::map<std::string, const PersonaFeatures*> by_speaker;
  for (const auto& p : personas) by_speaker[p.speaker_id] = &p;

  EvalContext context;
  context.registry = &registry;
  context.scorers = &scorers;
  context.budget = budget;
  context.master_seed = master_seed;
  context.workers = workers;

  std::size_t limit = budget.pairs > 0 ? static_cast<std::size_t>(budget.pairs)
                                       : corpus.conversations.size();
  std::vector<Conversation> sampled;
  for (const auto& conv : corpus.conversations) {
    if (context.pairs.size() >= limit) break;
    if (conv.participants.size() != 2) continue;
    const auto a = by_speaker.find(conv.participants[0]);
    const auto b = by_speaker.find(conv.participants[1]);
    if (a == by_speaker.end() || b == by_speaker.end()) {
      throw ConfigError("no persona for conversation '" + conv.conversation_id +
                        "'; run extraction first");
    }
    context.pairs.push_back(PersonaPair{*a->second, *b->second, conv.conversation_id});
    sampled.push_back(conv);
  }
  if (context.pairs.empty()) {
    throw ConfigError("no usable persona pairs in corpus");
  }
  context.human_samples = score_conversations(sampled, scorers);
  return context;
}

Evaluation evaluate_variants(const PromptVariantSet& variants, const EvalContext& context,
                             ChatClient& client, const Objective& objective) {
  BatchOptions options;
  options.conversations_per_pair = context.budget.replicates;
  options.turns = context.budget.turns;
  options.master_seed = context.master_seed;  // identical across variant sets
  options.workers = context.workers;
  options.min_success_fraction = context.min_success_fraction;

  Evaluation eval;
  eval.variants = variants;
  eval.dialogues = run_batch(context.pairs, variants, *context.registry, client, options);
  const SampleTable generated = score_conversations(
      eval.dialogues.to_conversations(context.exclude_truncated), *context.scorers);
  eval.report = compare_tables(context.human_samples, generated);
  eval.report.variant_key = variants.key();
  eval.objective = objective.value(eval.report);
  return eval;
}

namespace {

ordered_json variants_to_json(const PromptVariantSet& variants) {
  ordered_json j = ordered_json::object();
  for (const auto& [axis, id] : variants.choices()) j[axis] = id;
  return j;
}

PromptVariantSet variants_from_json(const ordered_json& j) {
  PromptVariantSet set;
  for (const auto& [axis, id] : j.items()) set.choose(axis, id.get<std::string>());
  return set;
}

class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& path, std::uint64_t key) {
    if (path.empty()) return;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw ConfigError("cannot write trace file: " + path.string());
    ordered_json header;
    header["state_key"] = key;
    out_ << header.dump() << '\n';
    out_.flush();
  }

  void append(const TraceEntry& entry) {
    if (!out_.is_open()) return;
    ordered_json j;
    j["variants"] = variants_to_json(entry.variants);
    j["axis"] = entry.axis;
    j["objective"] = entry.objective;
    j["axis_objective"] = entry.axis_objective;
    j["adopted"] = entry.adopted;
    j["report"] = ordered_json::parse(entry.report.to_json());
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

struct CachedEvaluation {
  double objective = 0.0;
  MetricReport report;
};

std::map<std::string, CachedEvaluation> load_resume_cache(const std::filesystem::path& path,
                                                          std::uint64_t key) {
  std::map<std::string, CachedEvaluation> cache;
  if (path.empty() || !std::filesystem::exists(path)) return cache;
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) return cache;
  ordered_json header;
  try {
    header = ordered_json::parse(lines.front());
  } catch (const nlohmann::json::exception&) {
    return cache;
  }
  if (header.value("state_key", std::uint64_t{0}) != key) {
    // different axes/objective/budget/seed; nothing reusable
    return cache;
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(lines[i]);
    } catch (const nlohmann::json::exception&) {
      continue;  // partial trailing line from an interrupted run
    }
    try {
      PromptVariantSet variants = variants_from_json(j.at("variants"));
      CachedEvaluation cached;
      cached.objective = j.at("objective").get<double>();
      cached.report = MetricReport::from_json_text(j.at("report").dump());
      cache[variants.key()] = std::move(cached);
    } catch (const std::exception&) {
      continue;
    }
  }
  return cache;
}

}  // namespace

std::uint64_t optimize_state_key(const PromptRegistry& registry, const Objective& objective,
                                 const EvalBudget& budget, std::uint64_t master_seed) {
  std::ostringstream text;
  text << registry.to_json() << '\n'
       << objective.canonical_text() << '\n'
       << budget.pairs << ',' << budget.replicates << ',' << budget.turns << '\n'
       << master_seed;
  return fnv1a64(text.str());
}

OptimizationState optimize(const PromptRegistry& registry, const EvalContext& context,
                           ChatClient& client, const Objective& objective,
                           const OptimizeOptions& options) {
  for (const auto& axis : registry.axes()) {
    if (axis.variants.empty()) {
      throw ConfigError("axis '" + axis.name + "' has no variants");
    }
  }

  const std::uint64_t state_key =
      optimize_state_key(registry, objective, context.budget, context.master_seed);
  auto cache = load_resume_cache(options.resume_path, state_key);
  TraceWriter trace_writer(options.trace_path, state_key);

  OptimizationState state;

  struct EvalResult {
    double objective = 0.0;
    MetricReport report;
    std::optional<DialogueSet> dialogues;  // present only for fresh evaluations
  };

  auto evaluate = [&](const PromptVariantSet& variants, const std::string& axis,
                      bool* exhausted) -> std::optional<EvalResult> {
    const std::string key = variants.key();
    EvalResult result;
    auto it = cache.find(key);
    if (it != cache.end()) {
      ++state.reused_evaluations;
      result.objective = it->second.objective;
      result.report = it->second.report;
    } else {
      if (options.max_evaluations > 0 &&
          state.evaluations >= static_cast<std::size_t>(options.max_evaluations)) {
        *exhausted = true;
        return std::nullopt;
      }
      ++state.evaluations;
      Evaluation eval = evaluate_variants(variants, context, client, objective);
      result.objective = eval.objective;
      result.report = eval.report;
      result.dialogues = std::move(eval.dialogues);
      cache[key] = CachedEvaluation{result.objective, result.report};
    }
    TraceEntry entry;
    entry.variants = variants;
    entry.axis = axis;
    entry.objective = result.objective;
    entry.axis_objective = objective.value_for_axis(result.report, axis);
    entry.report = result.report;
    state.trace.push_back(entry);
    trace_writer.append(entry);
    return result;
  };

  auto mark_adopted = [&](const PromptVariantSet& variants) {
    for (auto it = state.trace.rbegin(); it != state.trace.rend(); ++it) {
      if (it->variants.key() == variants.key()) {
        it->adopted = true;
        break;
      }
    }
  };

  PromptVariantSet current = PromptVariantSet::baseline(registry.axes());
  bool exhausted = false;
  auto initial = evaluate(current, "", &exhausted);
  if (!initial) {
    throw ConfigError("optimization budget exhausted before the initial evaluation");
  }
  mark_adopted(current);

  EvalResult current_eval{initial->objective, initial->report, std::nullopt};
  DialogueSet best_dialogues;
  std::string best_dialogues_key;
  if (initial->dialogues) {
    best_dialogues = std::move(*initial->dialogues);
    best_dialogues_key = current.key();
  }

  const int max_passes = 64;  // safety stop; strict improvement terminates far earlier
  for (int pass = 0; pass < max_passes && !exhausted; ++pass) {
    bool adopted_any = false;
    for (const auto& axis : registry.axes()) {
      const std::string* current_choice = current.choice(axis.name);
      const double current_axis_value = objective.value_for_axis(current_eval.report, axis.name);

      struct Candidate {
        PromptVariantSet variants;
        EvalResult eval;
        double axis_value = 0.0;
      };
      std::optional<Candidate> best_candidate;

      for (const auto& variant : axis.variants) {
        if (current_choice != nullptr && variant.id == *current_choice) continue;
        PromptVariantSet candidate = current;
        candidate.choose(axis.name, variant.id);
        auto result = evaluate(candidate, axis.name, &exhausted);
        if (!result) break;  // budget ran out mid-pass
        const double axis_value = objective.value_for_axis(result->report, axis.name);
        if (!best_candidate || axis_value < best_candidate->axis_value) {
          best_candidate = Candidate{candidate, std::move(*result), axis_value};
        }
      }
      if (exhausted) break;

      // Adoption needs a strict epsilon improvement on the axis objective and
      // a strictly lower global objective (cross-axis acceptance).
      if (best_candidate && best_candidate->axis_value < current_axis_value - options.epsilon &&
          best_candidate->eval.objective < current_eval.objective) {
        current = best_candidate->variants;
        if (best_candidate->eval.dialogues) {
          best_dialogues = std::move(*best_candidate->eval.dialogues);
          best_dialogues_key = current.key();
        }
        current_eval.objective = best_candidate->eval.objective;
        current_eval.report = std::move(best_candidate->eval.report);
        adopted_any = true;
        mark_adopted(current);
      }
    }
    state.passes = pass + 1;
    if (!adopted_any) break;
  }

  state.budget_exhausted = exhausted;
  state.best_variants = current;
  state.best_score = current_eval.objective;

  // Resumed or cached winners may not have dialogues from this run; batches
  // are seed-deterministic, so regenerate them.
  if (best_dialogues_key != current.key()) {
    BatchOptions batch;
    batch.conversations_per_pair = context.budget.replicates;
    batch.turns = context.budget.turns;
    batch.master_seed = context.master_seed;
    batch.workers = context.workers;
    batch.min_success_fraction = context.min_success_fraction;
    best_dialogues = run_batch(context.pairs, current, *context.registry, client, batch);
  }
  state.best_dialogues = std::move(best_dialogues);
  return state;
}

}  // namespace parley
