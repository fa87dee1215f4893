#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "parley/errors.hpp"

namespace parley {

enum class Sex { male, female };

std::string to_string(Sex sex);
std::optional<Sex> sex_from_string(std::string_view s);

struct Turn {
  std::string speaker_id;
  int index = 0;  // 0-based position within the conversation
  std::string text;
};

// Survey row for one participant. Fields are optional so defective source
// rows survive loading; anomalies are recorded in `flags` and completeness
// is decided once, in filter_complete.
struct SpeakerRecord {
  std::string speaker_id;
  std::optional<int> age;
  std::optional<Sex> sex;
  std::optional<int> overall_affect;  // valid range [1,9]
  std::vector<std::string> flags;

  bool complete() const;
};

struct Conversation {
  std::string conversation_id;
  std::vector<Turn> turns;
  std::vector<std::string> participants;  // speaker ids, order of first utterance
  std::vector<std::string> flags;

  bool has_nonempty_transcript() const;
};

struct Corpus {
  std::vector<Conversation> conversations;
  std::map<std::string, SpeakerRecord> speakers;

  const SpeakerRecord* find_speaker(const std::string& speaker_id) const;
  std::size_t total_turns() const;
};

enum class CorpusFormat { jsonl, csv_dir };

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

// Canonical JSONL form: speaker lines sorted by speaker_id, then turn lines
// in conversation order. Loading a file produced here and re-serializing it
// yields the same bytes.
std::string corpus_to_jsonl(const Corpus& corpus);
void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);

struct FilterSummary {
  std::size_t retained = 0;
  std::size_t dropped = 0;
  std::map<std::string, std::size_t> drop_reasons;
};

// Keeps only two-party conversations whose participants both have complete
// surveys and whose transcript carries text. Never fails; idempotent.
Corpus filter_complete(const Corpus& corpus, FilterSummary* summary = nullptr);

struct TurnWindow {
  std::vector<Turn> turns;
  bool fallback = false;  // conversation shorter than the window start
};

// Selects turns by 1-based ordinal in [start, end]. Conversations shorter
// than `start` yield their trailing min(end-start+1, length) turns with the
// fallback flag set.
TurnWindow select_turn_window(const Conversation& conv, int start, int end);

}  // namespace parley
