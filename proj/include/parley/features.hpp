#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "parley/chat_client.hpp"
#include "parley/corpus.hpp"

namespace parley {

struct PersonaFeatures {
  std::string speaker_id;
  int age = 0;
  Sex gender = Sex::female;
  std::string affect_phrase;
  std::string topic_phrase;  // at most 4 words
  std::string source_conversation_id;
};

// The 1..9 affect verbalization table, ordered negative to positive with
// "neutral" at 5.
std::span<const std::string_view> affect_phrases();

// Phrase for a 1..9 survey score; throws std::out_of_range otherwise.
std::string affect_to_phrase(int score);

// Reverse lookup; returns 0 when the phrase is not in the table.
int affect_score_from_phrase(std::string_view phrase);

// The instruction prefix sent ahead of the turn window when asking the
// backend for a topic phrase.
std::string_view topic_instruction();

// Sends the window (one utterance per line, no speaker labels) to the
// backend; the reply is trimmed and truncated to its first 4 words.
std::string summarize_topic(std::span<const Turn> window, ChatClient& client,
                            const std::string& conversation_id = "");

struct ExtractOptions {
  int window_start = 51;  // 1-based inclusive
  int window_end = 70;
  int parallelism = 1;
};

// One persona per retained speaker: demographics copied from the survey,
// affect verbalized, and a single topic phrase per conversation shared by
// both participants. Expects a completeness-filtered corpus.
std::vector<PersonaFeatures> extract_personas(const Corpus& corpus, ChatClient& client,
                                              const ExtractOptions& options = {});

std::string personas_to_jsonl(std::span<const PersonaFeatures> personas);
void write_persona_cache(std::span<const PersonaFeatures> personas,
                         const std::filesystem::path& path);
std::vector<PersonaFeatures> load_persona_cache(const std::filesystem::path& path);

}  // namespace parley
