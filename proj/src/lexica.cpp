#include "parley/lexica.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "parley/util.hpp"

namespace parley {
namespace {

bool is_strippable_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string clean_token(std::string_view raw) {
  std::size_t begin = 0;
  std::size_t end = raw.size();
  while (begin < end && is_strippable_punct(raw[begin])) ++begin;
  while (end > begin && is_strippable_punct(raw[end - 1])) --end;
  std::string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
  }
  return out;
}

std::vector<std::string> parse_simple_csv_row(const std::string& line) {
  std::vector<std::string> cols;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"') {
      if (in_quotes && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else {
        in_quotes = !in_quotes;
      }
    } else if (c == ',' && !in_quotes) {
      cols.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cols.push_back(cur);
  return cols;
}

[[noreturn]] void fail_at(const std::string& source, std::size_t line_no, const std::string& what) {
  throw LexiconError(source + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      std::string token = clean_token(text.substr(start, i - start));
      if (!token.empty()) tokens.push_back(std::move(token));
    }
  }
  return tokens;
}

WeightedLexicon load_weighted_lexicon_csv(const std::filesystem::path& path,
                                          const std::string& name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LexiconError("cannot open lexicon file: " + path.string());
  }
  WeightedLexicon lex;
  lex.name = name;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = parse_simple_csv_row(line);
    if (first) {
      first = false;
      if (lowercase_ascii(trim(cols[0])) == "term") continue;
    }
    if (cols.size() != 2) {
      fail_at(path.string(), line_no, "expected 2 columns (term,weight)");
    }
    std::string term = lowercase_ascii(trim(cols[0]));
    if (term.empty()) fail_at(path.string(), line_no, "empty term");
    double weight = 0.0;
    try {
      weight = std::stod(trim(cols[1]));
    } catch (const std::exception&) {
      fail_at(path.string(), line_no, "weight is not a number: '" + cols[1] + "'");
    }
    if (!std::isfinite(weight)) fail_at(path.string(), line_no, "weight is not finite");
    if (term == "_intercept") {
      lex.intercept = weight;
    } else {
      lex.entries[term] = weight;
    }
  }
  return lex;
}

double score_weighted(std::span<const std::string> tokens, const WeightedLexicon& lex) {
  if (tokens.empty()) return lex.intercept;
  double weight_sum = 0.0;
  for (const auto& token : tokens) {
    auto it = lex.entries.find(token);
    if (it != lex.entries.end()) weight_sum += it->second;
  }
  return lex.intercept + weight_sum / static_cast<double>(tokens.size());
}

int discretize_gender(double score) { return score < 0.0 ? -1 : 1; }

CategoryDictionary CategoryDictionary::parse_dic(std::istream& in, const std::string& source_name) {
  CategoryDictionary dict;
  std::string line;
  std::size_t line_no = 0;
  int delimiters_seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped == "%") {
      ++delimiters_seen;
      continue;
    }
    if (delimiters_seen == 0) {
      fail_at(source_name, line_no, "expected '%' header delimiter before content");
    }
    auto fields = split_whitespace(stripped);
    if (delimiters_seen == 1) {
      // header: category id followed by its name
      if (fields.size() < 2) fail_at(source_name, line_no, "category header needs 'id name'");
      int id = 0;
      try {
        id = std::stoi(fields[0]);
      } catch (const std::exception&) {
        fail_at(source_name, line_no, "category id is not an integer: '" + fields[0] + "'");
      }
      std::string name = fields[1];
      if (dict.names_.count(id) > 0) {
        fail_at(source_name, line_no, "duplicate category id " + std::to_string(id));
      }
      if (dict.name_to_id_.count(name) > 0) {
        fail_at(source_name, line_no, "duplicate category name '" + name + "'");
      }
      dict.names_[id] = name;
      dict.name_to_id_[name] = id;
    } else {
      if (fields.size() < 2) {
        fail_at(source_name, line_no, "pattern entry needs at least one category id");
      }
      Pattern pattern;
      pattern.text = lowercase_ascii(fields[0]);
      if (!pattern.text.empty() && pattern.text.back() == '*') {
        pattern.prefix = true;
        pattern.text.pop_back();
        if (pattern.text.empty()) fail_at(source_name, line_no, "bare '*' pattern");
      }
      for (std::size_t i = 1; i < fields.size(); ++i) {
        int id = 0;
        try {
          id = std::stoi(fields[i]);
        } catch (const std::exception&) {
          fail_at(source_name, line_no, "category id is not an integer: '" + fields[i] + "'");
        }
        if (dict.names_.count(id) == 0) {
          fail_at(source_name, line_no,
                  "pattern '" + fields[0] + "' references undeclared category " + std::to_string(id));
        }
        pattern.category_ids.push_back(id);
      }
      dict.patterns_.push_back(std::move(pattern));
    }
  }
  if (delimiters_seen < 2) {
    throw LexiconError(source_name + ": missing '%'-delimited category header");
  }

  for (const Pattern& pattern : dict.patterns_) {
    if (pattern.prefix) {
      dict.prefix_buckets_[pattern.text.front()].push_back(&pattern);
    } else {
      auto& ids = dict.exact_[pattern.text];
      ids.insert(ids.end(), pattern.category_ids.begin(), pattern.category_ids.end());
    }
  }
  return dict;
}

CategoryDictionary CategoryDictionary::load_dic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LexiconError("cannot open dictionary file: " + path.string());
  }
  return parse_dic(in, path.string());
}

std::vector<std::string> CategoryDictionary::categories() const {
  std::vector<std::string> out;
  out.reserve(names_.size());
  for (const auto& [id, name] : names_) out.push_back(name);
  return out;
}

bool CategoryDictionary::has_category(std::string_view name) const {
  return name_to_id_.count(std::string(name)) > 0;
}

const std::string& CategoryDictionary::category_name(int id) const {
  auto it = names_.find(id);
  if (it == names_.end()) {
    throw LexiconError("unknown category id " + std::to_string(id));
  }
  return it->second;
}

int CategoryDictionary::category_id(std::string_view name) const {
  auto it = name_to_id_.find(std::string(name));
  if (it == name_to_id_.end()) {
    throw LexiconError("unknown category: '" + std::string(name) + "'");
  }
  return it->second;
}

bool CategoryDictionary::token_matches(const std::string& token, int category_id) const {
  auto exact = exact_.find(token);
  if (exact != exact_.end() &&
      std::find(exact->second.begin(), exact->second.end(), category_id) != exact->second.end()) {
    return true;
  }
  if (token.empty()) return false;
  auto bucket = prefix_buckets_.find(token.front());
  if (bucket == prefix_buckets_.end()) return false;
  for (const Pattern* pattern : bucket->second) {
    if (token.size() >= pattern->text.size() &&
        token.compare(0, pattern->text.size(), pattern->text) == 0 &&
        std::find(pattern->category_ids.begin(), pattern->category_ids.end(), category_id) !=
            pattern->category_ids.end()) {
      return true;
    }
  }
  return false;
}

std::size_t CategoryDictionary::match_count(std::span<const std::string> tokens,
                                            std::string_view category) const {
  const int id = category_id(category);
  std::size_t count = 0;
  for (const auto& token : tokens) {
    if (token_matches(token, id)) ++count;
  }
  return count;
}

double CategoryDictionary::score(std::span<const std::string> tokens,
                                 std::string_view category) const {
  const int id = category_id(category);  // validates even for empty input
  if (tokens.empty()) return 0.0;
  std::size_t count = 0;
  for (const auto& token : tokens) {
    if (token_matches(token, id)) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(tokens.size());
}

double score_category(std::span<const std::string> tokens, const CategoryDictionary& dict,
                      std::string_view category) {
  return dict.score(tokens, category);
}

TopicLexicon load_topic_lexicon_csv(const std::filesystem::path& path, int topic_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LexiconError("cannot open topic lexicon file: " + path.string());
  }
  TopicLexicon lex;
  int max_id = -1;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = parse_simple_csv_row(line);
    if (first) {
      first = false;
      if (lowercase_ascii(trim(cols[0])) == "term") continue;
    }
    if (cols.size() != 3) {
      fail_at(path.string(), line_no, "expected 3 columns (term,topic_id,weight)");
    }
    std::string term = lowercase_ascii(trim(cols[0]));
    if (term.empty()) fail_at(path.string(), line_no, "empty term");
    int topic_id = 0;
    double weight = 0.0;
    try {
      topic_id = std::stoi(trim(cols[1]));
      weight = std::stod(trim(cols[2]));
    } catch (const std::exception&) {
      fail_at(path.string(), line_no, "malformed topic row");
    }
    if (topic_id < 0) fail_at(path.string(), line_no, "negative topic_id");
    if (!(weight >= 0.0) || !std::isfinite(weight)) {
      fail_at(path.string(), line_no, "topic weight must be finite and non-negative");
    }
    max_id = std::max(max_id, topic_id);
    lex.weights[term].emplace_back(topic_id, weight);
  }
  lex.topic_count = topic_count > 0 ? topic_count : max_id + 1;
  if (max_id >= lex.topic_count) {
    throw LexiconError(path.string() + ": topic_id " + std::to_string(max_id) +
                       " outside declared topic_count " + std::to_string(lex.topic_count));
  }
  return lex;
}

Eigen::VectorXd topic_distribution(std::span<const std::string> tokens, const TopicLexicon& lex) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(lex.topic_count);
  if (tokens.empty()) return v;
  const double relfreq = 1.0 / static_cast<double>(tokens.size());
  for (const auto& token : tokens) {
    auto it = lex.weights.find(token);
    if (it == lex.weights.end()) continue;
    for (const auto& [topic_id, p] : it->second) {
      v[topic_id] += relfreq * p;
    }
  }
  const double total = v.sum();
  if (total > 0.0) v /= total;
  return v;
}

int turn_length(const Turn& turn) { return static_cast<int>(tokenize(turn.text).size()); }

std::string to_string(Level level) { return level == Level::turn ? "turn" : "speaker"; }

namespace {

struct SpeakerView {
  std::vector<const Turn*> turns;                   // in conversation order
  std::vector<std::pair<std::string, int>> units;   // (conversation_id, index) per turn
};

SpeakerView gather_speaker(std::span<const Conversation> conversations,
                           const std::string& speaker_id) {
  SpeakerView view;
  for (const auto& conv : conversations) {
    for (const auto& turn : conv.turns) {
      if (turn.speaker_id == speaker_id) {
        view.turns.push_back(&turn);
        view.units.emplace_back(conv.conversation_id, turn.index);
      }
    }
  }
  return view;
}

std::vector<FeatureSample> score_speaker_view(const std::string& speaker_id,
                                              const SpeakerView& view, const ScorerSet& scorers) {
  std::vector<FeatureSample> samples;

  std::vector<std::string> all_tokens;
  std::vector<std::vector<std::string>> per_turn_tokens;
  per_turn_tokens.reserve(view.turns.size());
  for (const Turn* turn : view.turns) {
    per_turn_tokens.push_back(tokenize(turn->text));
    all_tokens.insert(all_tokens.end(), per_turn_tokens.back().begin(),
                      per_turn_tokens.back().end());
  }

  auto speaker_sample = [&](const std::string& feature, double value) {
    FeatureSample s;
    s.unit_id = speaker_id;
    s.feature = feature;
    s.level = Level::speaker;
    s.value = value;
    samples.push_back(std::move(s));
  };

  if (scorers.age) speaker_sample("age", score_weighted(all_tokens, *scorers.age));
  if (scorers.gender) {
    speaker_sample("gender",
                   static_cast<double>(discretize_gender(score_weighted(all_tokens, *scorers.gender))));
  }
  if (scorers.dictionary) {
    speaker_sample("affect", scorers.dictionary->score(all_tokens, scorers.affect_category));
  }
  if (scorers.topics) {
    FeatureSample s;
    s.unit_id = speaker_id;
    s.feature = "topic";
    s.level = Level::speaker;
    s.vec = topic_distribution(all_tokens, *scorers.topics);
    samples.push_back(std::move(s));
  }

  for (std::size_t i = 0; i < view.turns.size(); ++i) {
    const auto& [conv_id, index] = view.units[i];
    const std::string unit = conv_id + "#" + std::to_string(index);
    FeatureSample length;
    length.unit_id = unit;
    length.feature = "length";
    length.level = Level::turn;
    length.value = static_cast<double>(per_turn_tokens[i].size());
    samples.push_back(std::move(length));
    if (scorers.dictionary) {
      FeatureSample informal;
      informal.unit_id = unit;
      informal.feature = "informal";
      informal.level = Level::turn;
      informal.value = scorers.dictionary->score(per_turn_tokens[i], scorers.informal_category);
      samples.push_back(std::move(informal));
    }
  }
  return samples;
}

}  // namespace

std::vector<FeatureSample> score_speaker(std::span<const Conversation> conversations,
                                         const std::string& speaker_id, const ScorerSet& scorers) {
  SpeakerView view = gather_speaker(conversations, speaker_id);
  if (view.turns.empty()) {
    throw LexiconError("unknown speaker (no turns): '" + speaker_id + "'");
  }
  return score_speaker_view(speaker_id, view, scorers);
}

const std::vector<FeatureSample>* SampleTable::find(const std::string& feature) const {
  auto it = features.find(feature);
  return it == features.end() ? nullptr : &it->second;
}

SampleTable score_conversations(std::span<const Conversation> conversations,
                                const ScorerSet& scorers) {
  std::vector<std::string> speaker_order;
  for (const auto& conv : conversations) {
    for (const auto& speaker_id : conv.participants) {
      if (std::find(speaker_order.begin(), speaker_order.end(), speaker_id) ==
          speaker_order.end()) {
        speaker_order.push_back(speaker_id);
      }
    }
  }

  SampleTable table;
  for (const auto& speaker_id : speaker_order) {
    SpeakerView view = gather_speaker(conversations, speaker_id);
    if (view.turns.empty()) continue;
    for (auto& sample : score_speaker_view(speaker_id, view, scorers)) {
      table.features[sample.feature].push_back(std::move(sample));
    }
  }
  return table;
}

}  // namespace parley
