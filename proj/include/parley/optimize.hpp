#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parley/chat_client.hpp"
#include "parley/corpus.hpp"
#include "parley/features.hpp"
#include "parley/lexica.hpp"
#include "parley/metrics.hpp"
#include "parley/prompts.hpp"
#include "parley/simulate.hpp"

namespace parley {

// The scalar being minimized: a weighted mean of per-feature error-of-average
// values. An axis may override the weighting so a single study axis is judged
// by its own target feature.
struct Objective {
  std::map<std::string, double> weights;  // feature -> non-negative weight
  std::map<std::string, std::map<std::string, double>> axis_weights;

  static Objective uniform(const std::vector<std::string>& features);

  double value(const MetricReport& report) const;
  double value_for_axis(const MetricReport& report, const std::string& axis) const;
  std::string canonical_text() const;  // stable form for resume-state hashing

 private:
  static double weighted_value(const MetricReport& report,
                               const std::map<std::string, double>& weights);
};

struct EvalBudget {
  int pairs = 0;  // 0 = all corpus conversations
  int replicates = 1;
  int turns = 64;
};

// Everything an evaluation needs that does not change across variant sets:
// the sampled persona pairs, the human-side samples scored once, and the
// master seed shared by every evaluation (common random numbers).
struct EvalContext {
  std::vector<PersonaPair> pairs;
  SampleTable human_samples;
  const PromptRegistry* registry = nullptr;
  const ScorerSet* scorers = nullptr;
  EvalBudget budget;
  std::uint64_t master_seed = 0;
  int workers = 1;
  double min_success_fraction = 1.0;
  bool exclude_truncated = true;

  static EvalContext prepare(const Corpus& corpus, const std::vector<PersonaFeatures>& personas,
                             const ScorerSet& scorers, const PromptRegistry& registry,
                             const EvalBudget& budget, std::uint64_t master_seed, int workers = 1);
};

struct Evaluation {
  PromptVariantSet variants;
  MetricReport report;
  double objective = 0.0;
  DialogueSet dialogues;
};

Evaluation evaluate_variants(const PromptVariantSet& variants, const EvalContext& context,
                             ChatClient& client, const Objective& objective);

struct TraceEntry {
  PromptVariantSet variants;
  std::string axis;  // empty for the initial evaluation
  double objective = 0.0;        // global
  double axis_objective = 0.0;   // effective value used for the adoption decision
  bool adopted = false;
  MetricReport report;
};

struct OptimizeOptions {
  double epsilon = 1e-3;    // minimum strict improvement for adoption
  int max_evaluations = 0;  // 0 = unlimited
  std::filesystem::path trace_path;   // written incrementally when set
  std::filesystem::path resume_path;  // previous trace to reuse evaluations from
};

struct OptimizationState {
  PromptVariantSet best_variants;
  DialogueSet best_dialogues;
  double best_score = 0.0;
  std::vector<TraceEntry> trace;
  int passes = 0;
  bool budget_exhausted = false;
  std::size_t evaluations = 0;
  std::size_t reused_evaluations = 0;
};

// Coordinate descent over the registry's axes, starting from the all-absent
// baseline: each pass tries every alternative variant per axis (others held
// fixed) and adopts the best candidate iff it improves the axis objective by
// more than epsilon and strictly lowers the global objective. Stops when a
// full pass adopts nothing.
OptimizationState optimize(const PromptRegistry& registry, const EvalContext& context,
                           ChatClient& client, const Objective& objective,
                           const OptimizeOptions& options = {});

// Content hash identifying an optimization run for resume compatibility.
std::uint64_t optimize_state_key(const PromptRegistry& registry, const Objective& objective,
                                 const EvalBudget& budget, std::uint64_t master_seed);

}  // namespace parley
