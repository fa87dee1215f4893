#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "parley/chat_client.hpp"
#include "parley/corpus.hpp"

namespace parley {

// Overrides applied when `marker` occurs in the system prompt; lets tests
// define prompt axes with arbitrary wording and still steer the mock.
struct MockMarkerRule {
  std::string marker;
  std::optional<int> words;
  std::optional<double> informal_rate;
  std::optional<double> affect_rate;
  std::optional<int> age;
  std::optional<Sex> gender;
  std::optional<std::string> topic;
};

// Controls the measurable envelope of mock utterances. The *_token fields
// are the contract with the toy lexica used in tests: the age lexicon maps
// age_token to age_weight with intercept age_intercept, the gender lexicon
// gives female_token a positive and male_token a negative weight, the
// category dictionary lists informal_tokens under "informal" and the
// positive/negative tokens under "affect", and the topic lexicon assigns
// topic words to topics.
struct MockStyle {
  int base_words = 42;   // unprompted utterance length
  int short_words = 9;   // when the length fragment is present
  int max_words = 0;     // hard cap; 0 disables

  double base_informal_rate = 0.06;
  double casual_informal_rate = 0.82;  // "informal language" fragment
  double plain_informal_rate = 0.10;   // "normal person" fragment

  int fallback_age = 38;               // persona used when unprompted
  std::optional<Sex> fallback_gender;  // unset: derived from the seed
  int fallback_affect_score = 7;
  std::string fallback_topic = "weather commute";

  std::string age_token = "oldtimer";
  double age_intercept = 20.0;
  double age_weight = 200.0;
  std::string female_token = "gal";
  std::string male_token = "dude";
  double gender_rate = 0.08;
  std::vector<std::string> positive_tokens = {"happy", "glad"};
  std::vector<std::string> negative_tokens = {"grim", "gloomy"};
  double affect_rate_per_score = 0.01;  // token rate = score * this
  double topic_rate = 0.12;
  std::vector<std::string> informal_tokens = {"gonna", "wanna", "lol", "yeah", "kinda", "dunno"};
  std::vector<std::string> filler_tokens = {"well",  "so",    "right", "okay",  "think",
                                            "really", "today", "maybe", "about", "stuff"};

  std::vector<MockMarkerRule> rules;
};

// Deterministic offline chat backend. Each reply is a pure function of
// (client seed, call seed, system text, history), so batches replay
// byte-identically at any worker count. Persona markers in the prompts set
// the utterance envelope: age, gender and affect parsed from the system
// text, topic from the opening user message (or mirrored from unfamiliar
// words the other agent used). Requests whose first user message carries
// the topic-summary instruction get a short topic phrase instead of chat.
// History protocol violations are counted, never thrown.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(std::uint64_t seed, MockStyle style = {});

  std::string do_complete(const std::string& system_text, const std::vector<ChatMessage>& history,
                       std::uint64_t seed) override;
  std::string id() const override { return "mock#" + std::to_string(seed_); }

  long call_count() const { return calls_.load(); }
  long violation_count() const { return violations_.load(); }
  const MockStyle& style() const { return style_; }

 private:
  struct Envelope;
  Envelope envelope_for(const std::string& system_text, const std::vector<ChatMessage>& history,
                        std::uint64_t conversation_seed) const;
  std::string summarize(const std::string& request) const;
  std::set<std::string> known_vocabulary() const;

  std::uint64_t seed_;
  MockStyle style_;
  mutable std::atomic<long> calls_{0};
  mutable std::atomic<long> violations_{0};
};

}  // namespace parley
