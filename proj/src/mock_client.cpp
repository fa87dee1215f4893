#include "parley/mock_client.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "parley/features.hpp"
#include "parley/lexica.hpp"
#include "parley/util.hpp"

namespace parley {
namespace {

const std::set<std::string>& summary_stopwords() {
  static const std::set<std::string> words = {
      "the",  "and",  "that", "this",  "with", "have", "just",   "like", "know",
      "what", "your", "you",  "about", "been", "from", "they",   "were", "some",
      "yeah", "okay", "well", "really", "then", "them", "there",
  };
  return words;
}

std::optional<int> parse_age_marker(const std::string& system_text) {
  // matches "<digits> years old"
  const std::string marker = " years old";
  std::size_t pos = system_text.find(marker);
  if (pos == std::string::npos || pos == 0) return std::nullopt;
  std::size_t end = pos;
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(system_text[begin - 1]))) --begin;
  if (begin == end) return std::nullopt;
  try {
    return std::stoi(system_text.substr(begin, end - begin));
  } catch (const std::out_of_range&) {
    return std::nullopt;
  }
}

std::optional<Sex> parse_gender_marker(const std::string& system_text) {
  if (system_text.find("you are a female") != std::string::npos) return Sex::female;
  if (system_text.find("you are a male") != std::string::npos) return Sex::male;
  return std::nullopt;
}

std::optional<int> parse_affect_marker(const std::string& system_text) {
  const std::string prefix = "You feel ";
  const std::string suffix = " feelings";
  std::size_t begin = system_text.find(prefix);
  if (begin == std::string::npos) return std::nullopt;
  begin += prefix.size();
  std::size_t end = system_text.find(suffix, begin);
  if (end == std::string::npos) return std::nullopt;
  int score = affect_score_from_phrase(system_text.substr(begin, end - begin));
  if (score == 0) return std::nullopt;
  return score;
}

std::optional<std::string> parse_topic_marker(const std::string& text) {
  const std::string marker = "following topics: ";
  std::size_t begin = text.find(marker);
  if (begin == std::string::npos) return std::nullopt;
  begin += marker.size();
  std::size_t end = text.find('.', begin);
  if (end == std::string::npos) end = text.size();
  std::string topic = trim(text.substr(begin, end - begin));
  if (topic.empty()) return std::nullopt;
  return topic;
}

// Stochastic rounding keeps low-rate pools represented on short utterances:
// the population rate converges to `rate` even when rate * words < 0.5.
int count_of(double rate, int words, std::mt19937_64& rng) {
  const double x = std::max(0.0, rate * words);
  int count = static_cast<int>(x);
  const double frac = x - count;
  if (frac > 0.0) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (u01(rng) < frac) ++count;
  }
  return count;
}

}  // namespace

struct MockChatClient::Envelope {
  int words = 0;
  double informal_rate = 0.0;
  int age = 0;
  Sex gender = Sex::female;
  int affect_score = 5;       // selects the positive or negative pool
  double affect_rate = 0.0;
  std::vector<std::string> topic_words;
};

MockChatClient::MockChatClient(std::uint64_t seed, MockStyle style)
    : seed_(seed), style_(std::move(style)) {}

MockChatClient::Envelope MockChatClient::envelope_for(const std::string& system_text,
                                                      const std::vector<ChatMessage>& history,
                                                      std::uint64_t conversation_seed) const {
  Envelope env;
  env.words = style_.base_words;
  env.informal_rate = style_.base_informal_rate;
  env.age = style_.fallback_age;
  env.affect_score = style_.fallback_affect_score;

  if (style_.fallback_gender) {
    env.gender = *style_.fallback_gender;
  } else {
    // Derived from the conversation seed so an unprompted agent keeps one
    // gender for a whole conversation but the population splits evenly.
    env.gender = (mix_seed(seed_, conversation_seed) & 1) ? Sex::female : Sex::male;
  }

  if (auto age = parse_age_marker(system_text)) env.age = *age;
  if (auto gender = parse_gender_marker(system_text)) env.gender = *gender;
  if (auto affect = parse_affect_marker(system_text)) env.affect_score = *affect;
  if (system_text.find("at most one or two sentences") != std::string::npos) {
    env.words = style_.short_words;
  }
  if (system_text.find("informal language") != std::string::npos) {
    env.informal_rate = style_.casual_informal_rate;
  } else if (system_text.find("normal person holding a conversation") != std::string::npos) {
    env.informal_rate = style_.plain_informal_rate;
  }
  env.affect_rate = style_.affect_rate_per_score * env.affect_score;

  // Topic: the opening user message names it for agent A; agent B mirrors
  // the unfamiliar words its partner keeps using.
  std::optional<std::string> topic;
  for (const ChatMessage& message : history) {
    if (message.role != ChatMessage::Role::user) continue;
    if (auto found = parse_topic_marker(message.content)) {
      topic = *found;
      break;
    }
  }
  if (topic) {
    env.topic_words = tokenize(*topic);
  } else {
    const std::set<std::string> known = known_vocabulary();
    std::map<std::string, int> counts;
    for (const ChatMessage& message : history) {
      if (message.role != ChatMessage::Role::user) continue;
      for (const std::string& token : tokenize(message.content)) {
        if (token.size() < 4) continue;
        if (known.count(token) > 0 || summary_stopwords().count(token) > 0) continue;
        ++counts[token];
      }
    }
    std::vector<std::pair<int, std::string>> ranked;
    for (const auto& [token, count] : counts) ranked.emplace_back(-count, token);
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t i = 0; i < ranked.size() && i < 2; ++i) {
      env.topic_words.push_back(ranked[i].second);
    }
    if (env.topic_words.empty()) env.topic_words = tokenize(style_.fallback_topic);
  }

  for (const MockMarkerRule& rule : style_.rules) {
    if (system_text.find(rule.marker) == std::string::npos) continue;
    if (rule.words) env.words = *rule.words;
    if (rule.informal_rate) env.informal_rate = *rule.informal_rate;
    if (rule.affect_rate) env.affect_rate = *rule.affect_rate;
    if (rule.age) env.age = *rule.age;
    if (rule.gender) env.gender = *rule.gender;
    if (rule.topic) env.topic_words = tokenize(*rule.topic);
  }
  return env;
}

std::set<std::string> MockChatClient::known_vocabulary() const {
  std::set<std::string> known(style_.informal_tokens.begin(), style_.informal_tokens.end());
  known.insert(style_.filler_tokens.begin(), style_.filler_tokens.end());
  known.insert(style_.positive_tokens.begin(), style_.positive_tokens.end());
  known.insert(style_.negative_tokens.begin(), style_.negative_tokens.end());
  known.insert(style_.age_token);
  known.insert(style_.female_token);
  known.insert(style_.male_token);
  return known;
}

std::string MockChatClient::summarize(const std::string& request) const {
  // Style vocabulary carries no topical content; skip it alongside stopwords.
  const std::set<std::string> known = known_vocabulary();
  std::map<std::string, int> counts;
  for (const std::string& token : tokenize(request)) {
    if (token.size() < 4) continue;
    if (summary_stopwords().count(token) > 0 || known.count(token) > 0) continue;
    ++counts[token];
  }
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& [token, count] : counts) ranked.emplace_back(-count, token);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> words;
  for (std::size_t i = 0; i < ranked.size() && i < 2; ++i) words.push_back(ranked[i].second);
  if (words.empty()) return "general chat";
  return join(words, " ");
}

std::string MockChatClient::do_complete(const std::string& system_text,
                                     const std::vector<ChatMessage>& history, std::uint64_t seed) {
  calls_.fetch_add(1);

  bool valid = !history.empty() && history.front().role == ChatMessage::Role::user &&
               history.back().role == ChatMessage::Role::user;
  for (std::size_t i = 1; valid && i < history.size(); ++i) {
    if (history[i].role == history[i - 1].role) valid = false;
  }
  if (!valid) violations_.fetch_add(1);

  if (!history.empty() &&
      history.front().content.rfind(std::string(topic_instruction()), 0) == 0) {
    return summarize(history.front().content);
  }

  std::uint64_t utterance_seed = mix_seed(mix_seed(seed_, seed), fnv1a64(system_text));
  if (!history.empty()) {
    utterance_seed = mix_seed(utterance_seed, fnv1a64(history.back().content));
    utterance_seed = mix_seed(utterance_seed, history.size());
  }
  Envelope env = envelope_for(system_text, history, seed);

  int words = env.words;
  if (style_.max_words > 0) words = std::min(words, style_.max_words);
  words = std::max(words, 1);

  double age_rate = 0.0;
  if (style_.age_weight != 0.0) {
    age_rate = std::clamp((env.age - style_.age_intercept) / style_.age_weight, 0.0, 0.45);
  }

  std::mt19937_64 rng(utterance_seed);
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(words));

  auto emit_cycle = [&](const std::vector<std::string>& pool, int count) {
    if (pool.empty()) return;
    std::size_t start = rng() % pool.size();
    for (int i = 0; i < count; ++i) {
      tokens.push_back(pool[(start + static_cast<std::size_t>(i)) % pool.size()]);
    }
  };

  emit_cycle(env.topic_words, count_of(style_.topic_rate, words, rng));
  emit_cycle(style_.informal_tokens, count_of(env.informal_rate, words, rng));
  if (env.affect_score > 5) {
    emit_cycle(style_.positive_tokens, count_of(env.affect_rate, words, rng));
  } else if (env.affect_score < 5) {
    emit_cycle(style_.negative_tokens, count_of(env.affect_rate, words, rng));
  } else {
    int n = count_of(env.affect_rate, words, rng);
    emit_cycle(style_.positive_tokens, n / 2);
    emit_cycle(style_.negative_tokens, n - n / 2);
  }
  emit_cycle({env.gender == Sex::female ? style_.female_token : style_.male_token},
             count_of(style_.gender_rate, words, rng));
  emit_cycle({style_.age_token}, count_of(age_rate, words, rng));

  while (static_cast<int>(tokens.size()) < words && !style_.filler_tokens.empty()) {
    tokens.push_back(style_.filler_tokens[rng() % style_.filler_tokens.size()]);
  }
  std::shuffle(tokens.begin(), tokens.end(), rng);
  if (static_cast<int>(tokens.size()) > words) tokens.resize(static_cast<std::size_t>(words));

  std::string utterance = join(tokens, " ");
  if (!utterance.empty()) {
    utterance.front() =
        static_cast<char>(std::toupper(static_cast<unsigned char>(utterance.front())));
    utterance += '.';
  }
  return utterance;
}

}  // namespace parley
