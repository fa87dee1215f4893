#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "parley/corpus.hpp"
#include "parley/errors.hpp"

namespace parley {

// Lowercases, splits on whitespace, strips leading/trailing punctuation.
// Word-internal punctuation (apostrophes, hyphens) survives. Idempotent:
// re-tokenizing the joined output is a fixed point.
std::vector<std::string> tokenize(std::string_view text);

struct WeightedLexicon {
  std::string name;
  std::unordered_map<std::string, double> entries;  // lowercase token -> weight
  double intercept = 0.0;
};

// CSV of term,weight rows; the reserved term `_intercept` sets the model
// intercept. A leading `term,weight` header row is skipped if present.
WeightedLexicon load_weighted_lexicon_csv(const std::filesystem::path& path,
                                          const std::string& name);

// intercept + sum over tokens of weight(token) / |tokens|. Empty input
// scores the bare intercept.
double score_weighted(std::span<const std::string> tokens, const WeightedLexicon& lex);

// Sign of a continuous gender score: 1 (female) for score >= 0, -1 (male)
// otherwise. The zero tie resolves to 1.
int discretize_gender(double score);

class CategoryDictionary {
 public:
  struct Pattern {
    std::string text;  // lowercase; prefix patterns have the '*' removed
    bool prefix = false;
    std::vector<int> category_ids;
  };

  // LIWC-style .dic: a %-delimited header of `id name` lines, then
  // `pattern id [id ...]` entries. A trailing '*' marks a prefix pattern.
  static CategoryDictionary parse_dic(std::istream& in, const std::string& source_name);
  static CategoryDictionary load_dic(const std::filesystem::path& path);

  std::vector<std::string> categories() const;
  bool has_category(std::string_view name) const;
  const std::string& category_name(int id) const;
  const std::vector<Pattern>& patterns() const { return patterns_; }

  std::size_t match_count(std::span<const std::string> tokens, std::string_view category) const;
  double score(std::span<const std::string> tokens, std::string_view category) const;

 private:
  int category_id(std::string_view name) const;
  bool token_matches(const std::string& token, int category_id) const;

  std::map<int, std::string> names_;
  std::unordered_map<std::string, int> name_to_id_;
  std::vector<Pattern> patterns_;
  std::unordered_map<std::string, std::vector<int>> exact_;
  // Prefix patterns bucketed by first byte to keep token scans cheap.
  std::unordered_map<char, std::vector<const Pattern*>> prefix_buckets_;
};

// Proportion of tokens matching any pattern of `category`; 0 for empty input.
double score_category(std::span<const std::string> tokens, const CategoryDictionary& dict,
                      std::string_view category);

struct TopicLexicon {
  int topic_count = 0;
  std::unordered_map<std::string, std::vector<std::pair<int, double>>> weights;
};

// CSV of term,topic_id,weight rows (conditional probability of topic given
// word). topic_count is inferred as max id + 1 unless given explicitly.
TopicLexicon load_topic_lexicon_csv(const std::filesystem::path& path, int topic_count = 0);

// v[t] = sum over tokens of relfreq(token) * p(t | token), L1-normalized.
// Documents with no in-lexicon token yield the all-zero vector.
Eigen::VectorXd topic_distribution(std::span<const std::string> tokens, const TopicLexicon& lex);

int turn_length(const Turn& turn);

enum class Level { turn, speaker };

std::string to_string(Level level);

struct FeatureSample {
  std::string unit_id;  // speaker_id, or "<conversation_id>#<index>" for turn units
  std::string feature;
  Level level = Level::speaker;
  double value = 0.0;
  Eigen::VectorXd vec;  // non-empty only for vector features

  bool is_vector() const { return vec.size() > 0; }
};

// The lexicon stack applied to one corpus side. Scorers left unset are
// skipped; turn length needs no lexicon and is always emitted.
struct ScorerSet {
  std::optional<WeightedLexicon> age;
  std::optional<WeightedLexicon> gender;
  std::optional<CategoryDictionary> dictionary;
  std::string affect_category = "affect";
  std::string informal_category = "informal";
  std::optional<TopicLexicon> topics;
};

// Speaker-level features (age, gender, affect, topic) are computed on the
// concatenation of all of the speaker's turns; length and informal are
// emitted per turn.
std::vector<FeatureSample> score_speaker(std::span<const Conversation> conversations,
                                         const std::string& speaker_id, const ScorerSet& scorers);

struct SampleTable {
  std::map<std::string, std::vector<FeatureSample>> features;

  const std::vector<FeatureSample>* find(const std::string& feature) const;
};

SampleTable score_conversations(std::span<const Conversation> conversations,
                                const ScorerSet& scorers);

}  // namespace parley
