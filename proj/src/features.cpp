#include "parley/features.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "parley/util.hpp"

namespace parley {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 9> kAffectPhrases = {
    "extremely negative", "very negative",       "moderately negative",
    "slightly negative",  "neutral",             "slightly positive",
    "moderately positive", "very positive",      "extremely positive",
};

constexpr std::string_view kTopicInstruction =
    "Please summarize the topic of the following sentences in 4 words or less:";

std::string truncate_to_words(const std::string& text, std::size_t max_words) {
  auto words = split_whitespace(text);
  if (words.size() > max_words) words.resize(max_words);
  return join(words, " ");
}

}  // namespace

std::span<const std::string_view> affect_phrases() { return kAffectPhrases; }

std::string affect_to_phrase(int score) {
  if (score < 1 || score > 9) {
    throw std::out_of_range("affect score " + std::to_string(score) + " outside [1,9]");
  }
  return std::string(kAffectPhrases[static_cast<std::size_t>(score - 1)]);
}

int affect_score_from_phrase(std::string_view phrase) {
  for (std::size_t i = 0; i < kAffectPhrases.size(); ++i) {
    if (kAffectPhrases[i] == phrase) return static_cast<int>(i) + 1;
  }
  return 0;
}

std::string_view topic_instruction() { return kTopicInstruction; }

std::string summarize_topic(std::span<const Turn> window, ChatClient& client,
                            const std::string& conversation_id) {
  if (window.empty()) {
    throw std::invalid_argument("summarize_topic: empty turn window");
  }
  std::string request(kTopicInstruction);
  for (const Turn& turn : window) {
    request += '\n';
    request += turn.text;
  }
  std::string reply;
  try {
    reply = client.complete("", {{ChatMessage::Role::user, request}},
                            fnv1a64(conversation_id));
  } catch (const BackendError& e) {
    throw BackendError("topic summarization failed for conversation '" + conversation_id +
                       "': " + e.what());
  }
  std::string topic = truncate_to_words(trim(reply), 4);
  if (topic.empty()) {
    throw BackendError("topic summarization returned empty text for conversation '" +
                       conversation_id + "'");
  }
  return topic;
}

std::vector<PersonaFeatures> extract_personas(const Corpus& corpus, ChatClient& client,
                                              const ExtractOptions& options) {
  // One topic per conversation, summarized from its turn window.
  std::vector<std::string> topics(corpus.conversations.size());
  parallel_for(corpus.conversations.size(), options.parallelism, [&](std::size_t i) {
    const Conversation& conv = corpus.conversations[i];
    TurnWindow window = select_turn_window(conv, options.window_start, options.window_end);
    topics[i] = summarize_topic(window.turns, client, conv.conversation_id);
  });

  std::vector<PersonaFeatures> personas;
  std::vector<std::string> seen;
  for (std::size_t i = 0; i < corpus.conversations.size(); ++i) {
    const Conversation& conv = corpus.conversations[i];
    for (const std::string& speaker_id : conv.participants) {
      if (std::find(seen.begin(), seen.end(), speaker_id) != seen.end()) continue;
      seen.push_back(speaker_id);
      const SpeakerRecord* record = corpus.find_speaker(speaker_id);
      if (record == nullptr || !record->complete()) {
        throw CorpusError("extract_personas: speaker '" + speaker_id +
                          "' lacks a complete survey; filter the corpus first");
      }
      PersonaFeatures persona;
      persona.speaker_id = speaker_id;
      persona.age = *record->age;
      persona.gender = *record->sex;
      persona.affect_phrase = affect_to_phrase(*record->overall_affect);
      persona.topic_phrase = topics[i];
      persona.source_conversation_id = conv.conversation_id;
      personas.push_back(std::move(persona));
    }
  }
  return personas;
}

std::string personas_to_jsonl(std::span<const PersonaFeatures> personas) {
  std::string out;
  for (const PersonaFeatures& p : personas) {
    ordered_json row;
    row["speaker_id"] = p.speaker_id;
    row["age"] = p.age;
    row["gender"] = to_string(p.gender);
    row["affect_phrase"] = p.affect_phrase;
    row["topic_phrase"] = p.topic_phrase;
    row["source_conversation_id"] = p.source_conversation_id;
    out += row.dump();
    out += '\n';
  }
  return out;
}

void write_persona_cache(std::span<const PersonaFeatures> personas,
                         const std::filesystem::path& path) {
  write_file(path, personas_to_jsonl(personas));
}

std::vector<PersonaFeatures> load_persona_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CorpusError("cannot open persona cache: " + path.string());
  }
  std::vector<PersonaFeatures> personas;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ordered_json row;
    try {
      row = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON: " +
                        e.what());
    }
    PersonaFeatures p;
    try {
      p.speaker_id = row.at("speaker_id").get<std::string>();
      p.age = row.at("age").get<int>();
      auto sex = sex_from_string(row.at("gender").get<std::string>());
      if (!sex) throw std::invalid_argument("gender");
      p.gender = *sex;
      p.affect_phrase = row.at("affect_phrase").get<std::string>();
      p.topic_phrase = row.at("topic_phrase").get<std::string>();
      p.source_conversation_id = row.at("source_conversation_id").get<std::string>();
    } catch (const std::exception& e) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) +
                        ": invalid persona record: " + e.what());
    }
    personas.push_back(std::move(p));
  }
  return personas;
}

}  // namespace parley
