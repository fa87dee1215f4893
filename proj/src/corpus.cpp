#include "parley/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "parley/util.hpp"

namespace parley {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kAffectMin = 1;
constexpr int kAffectMax = 9;
constexpr int kReferenceAgeMin = 19;
constexpr int kReferenceAgeMax = 66;

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t line_no, const std::string& what) {
  throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

void note_age_range(SpeakerRecord& record) {
  if (record.age && (*record.age < kReferenceAgeMin || *record.age > kReferenceAgeMax)) {
    record.flags.push_back("age_outside_reference_range");
  }
}

void note_affect_range(SpeakerRecord& record) {
  if (record.overall_affect &&
      (*record.overall_affect < kAffectMin || *record.overall_affect > kAffectMax)) {
    record.flags.push_back("invalid_range:overall_affect");
  }
}

struct ConversationBuilder {
  Conversation conv;
  int last_index = -1;
};

void append_turn(ConversationBuilder& builder, Turn turn, const std::filesystem::path& path,
                 std::size_t line_no) {
  if (turn.index <= builder.last_index) {
    fail_at(path, line_no,
            "conversation " + builder.conv.conversation_id + ": turn index " +
                std::to_string(turn.index) + " does not increase (previous " +
                std::to_string(builder.last_index) + "); duplicate or reordered rows");
  }
  builder.last_index = turn.index;
  if (std::find(builder.conv.participants.begin(), builder.conv.participants.end(),
                turn.speaker_id) == builder.conv.participants.end()) {
    builder.conv.participants.push_back(turn.speaker_id);
  }
  builder.conv.turns.push_back(std::move(turn));
}

void finalize_conversations(std::vector<ConversationBuilder>& builders, Corpus& corpus) {
  for (auto& builder : builders) {
    if (builder.conv.participants.size() != 2) {
      builder.conv.flags.push_back("participants:" + std::to_string(builder.conv.participants.size()));
    } else if (builder.conv.participants[0] == builder.conv.participants[1]) {
      builder.conv.flags.push_back("participants:duplicate");
    }
    corpus.conversations.push_back(std::move(builder.conv));
  }
}

Corpus load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CorpusError("cannot open corpus file: " + path.string());
  }

  Corpus corpus;
  std::vector<ConversationBuilder> builders;
  std::map<std::string, std::size_t> conversation_slot;

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
      fail_at(path, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!row.is_object()) fail_at(path, line_no, "row is not an object");

    const std::string kind = row.value("kind", "");
    if (kind == "speaker") {
      SpeakerRecord record;
      if (!row.contains("speaker_id") || !row["speaker_id"].is_string()) {
        fail_at(path, line_no, "speaker row missing speaker_id");
      }
      record.speaker_id = row["speaker_id"].get<std::string>();
      if (corpus.speakers.count(record.speaker_id) > 0) {
        fail_at(path, line_no, "duplicate speaker_id: " + record.speaker_id);
      }

      if (row.contains("age") && !row["age"].is_null()) {
        if (!row["age"].is_number_integer()) fail_at(path, line_no, "age is not an integer");
        record.age = row["age"].get<int>();
      } else {
        record.flags.push_back("missing:age");
      }
      if (row.contains("sex") && !row["sex"].is_null()) {
        if (!row["sex"].is_string()) fail_at(path, line_no, "sex is not a string");
        auto sex = sex_from_string(row["sex"].get<std::string>());
        if (sex) {
          record.sex = *sex;
        } else {
          record.flags.push_back("invalid:sex");
        }
      } else {
        record.flags.push_back("missing:sex");
      }
      if (row.contains("overall_affect") && !row["overall_affect"].is_null()) {
        if (!row["overall_affect"].is_number_integer()) {
          fail_at(path, line_no, "overall_affect is not an integer");
        }
        record.overall_affect = row["overall_affect"].get<int>();
      } else {
        record.flags.push_back("missing:overall_affect");
      }
      note_age_range(record);
      note_affect_range(record);
      corpus.speakers.emplace(record.speaker_id, std::move(record));
    } else if (kind == "turn") {
      for (const char* field : {"conversation_id", "speaker_id", "text"}) {
        if (!row.contains(field) || !row[field].is_string()) {
          fail_at(path, line_no, std::string("turn row missing string field ") + field);
        }
      }
      if (!row.contains("index") || !row["index"].is_number_integer()) {
        fail_at(path, line_no, "turn row missing integer index");
      }
      Turn turn;
      turn.speaker_id = row["speaker_id"].get<std::string>();
      turn.index = row["index"].get<int>();
      turn.text = row["text"].get<std::string>();
      const std::string conv_id = row["conversation_id"].get<std::string>();

      auto it = conversation_slot.find(conv_id);
      if (it == conversation_slot.end()) {
        conversation_slot.emplace(conv_id, builders.size());
        builders.emplace_back();
        builders.back().conv.conversation_id = conv_id;
        it = conversation_slot.find(conv_id);
      }
      append_turn(builders[it->second], std::move(turn), path, line_no);
    } else {
      fail_at(path, line_no, "unknown kind: '" + kind + "'");
    }
  }

  finalize_conversations(builders, corpus);
  return corpus;
}

// Quote-aware single-line CSV field splitter.
std::vector<std::string> parse_csv_row(const std::string& line) {
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

std::optional<int> parse_int_field(const std::string& raw) {
  std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  int value = std::stoi(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing characters");
  return value;
}

void load_surveys_csv(const std::filesystem::path& path, Corpus& corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CorpusError("cannot open surveys file: " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = parse_csv_row(line);
    if (!header_seen) {
      header_seen = true;
      if (lowercase_ascii(trim(cols[0])) == "speaker_id") continue;  // header row
    }
    if (cols.size() != 4) {
      fail_at(path, line_no, "expected 4 columns (speaker_id,age,sex,overall_affect), got " +
                                 std::to_string(cols.size()));
    }
    SpeakerRecord record;
    record.speaker_id = trim(cols[0]);
    if (record.speaker_id.empty()) fail_at(path, line_no, "empty speaker_id");
    if (corpus.speakers.count(record.speaker_id) > 0) {
      fail_at(path, line_no, "duplicate speaker_id: " + record.speaker_id);
    }
    try {
      record.age = parse_int_field(cols[1]);
    } catch (const std::exception&) {
      fail_at(path, line_no, "age is not an integer: '" + cols[1] + "'");
    }
    if (!record.age) record.flags.push_back("missing:age");
    std::string sex_raw = trim(cols[2]);
    if (sex_raw.empty()) {
      record.flags.push_back("missing:sex");
    } else {
      auto sex = sex_from_string(sex_raw);
      if (sex) {
        record.sex = *sex;
      } else {
        record.flags.push_back("invalid:sex");
      }
    }
    try {
      record.overall_affect = parse_int_field(cols[3]);
    } catch (const std::exception&) {
      fail_at(path, line_no, "overall_affect is not an integer: '" + cols[3] + "'");
    }
    if (!record.overall_affect) record.flags.push_back("missing:overall_affect");
    note_age_range(record);
    note_affect_range(record);
    corpus.speakers.emplace(record.speaker_id, std::move(record));
  }
}

void load_transcript_csv(const std::filesystem::path& path, const std::string& conv_id,
                         std::vector<ConversationBuilder>& builders,
                         std::set<std::string>& seen_ids) {
  if (!seen_ids.insert(conv_id).second) {
    throw CorpusError("duplicate conversation_id across transcript files: " + conv_id);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CorpusError("cannot open transcript file: " + path.string());
  }
  builders.emplace_back();
  ConversationBuilder& builder = builders.back();
  builder.conv.conversation_id = conv_id;

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = parse_csv_row(line);
    if (!header_seen) {
      header_seen = true;
      if (lowercase_ascii(trim(cols[0])) == "index") continue;
    }
    if (cols.size() != 3) {
      fail_at(path, line_no, "expected 3 columns (index,speaker_id,text), got " +
                                 std::to_string(cols.size()));
    }
    Turn turn;
    try {
      auto idx = parse_int_field(cols[0]);
      if (!idx) throw std::invalid_argument("empty");
      turn.index = *idx;
    } catch (const std::exception&) {
      fail_at(path, line_no, "index is not an integer: '" + cols[0] + "'");
    }
    turn.speaker_id = trim(cols[1]);
    if (turn.speaker_id.empty()) fail_at(path, line_no, "empty speaker_id");
    turn.text = cols[2];
    append_turn(builder, std::move(turn), path, line_no);
  }
}

Corpus load_csv_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw CorpusError("not a directory: " + dir.string());
  }
  Corpus corpus;
  load_surveys_csv(dir / "surveys.csv", corpus);

  std::filesystem::path transcripts = dir / "transcripts";
  if (!std::filesystem::is_directory(transcripts)) transcripts = dir;

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(transcripts)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() != ".csv") continue;
    if (entry.path().filename() == "surveys.csv") continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<ConversationBuilder> builders;
  std::set<std::string> seen_ids;
  for (const auto& file : files) {
    load_transcript_csv(file, file.stem().string(), builders, seen_ids);
  }
  finalize_conversations(builders, corpus);
  return corpus;
}

}  // namespace

std::string to_string(Sex sex) { return sex == Sex::male ? "male" : "female"; }

std::optional<Sex> sex_from_string(std::string_view s) {
  if (s == "male") return Sex::male;
  if (s == "female") return Sex::female;
  return std::nullopt;
}

bool SpeakerRecord::complete() const {
  return age.has_value() && sex.has_value() && overall_affect.has_value() &&
         *overall_affect >= kAffectMin && *overall_affect <= kAffectMax;
}

bool Conversation::has_nonempty_transcript() const {
  return std::any_of(turns.begin(), turns.end(),
                     [](const Turn& t) { return !trim(t.text).empty(); });
}

const SpeakerRecord* Corpus::find_speaker(const std::string& speaker_id) const {
  auto it = speakers.find(speaker_id);
  return it == speakers.end() ? nullptr : &it->second;
}

std::size_t Corpus::total_turns() const {
  std::size_t n = 0;
  for (const auto& conv : conversations) n += conv.turns.size();
  return n;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  switch (format) {
    case CorpusFormat::jsonl:
      return load_jsonl(path);
    case CorpusFormat::csv_dir:
      return load_csv_dir(path);
  }
  throw CorpusError("unknown corpus format");
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& [id, record] : corpus.speakers) {
    ordered_json row;
    row["kind"] = "speaker";
    row["speaker_id"] = id;
    if (record.age) row["age"] = *record.age;
    if (record.sex) row["sex"] = to_string(*record.sex);
    if (record.overall_affect) row["overall_affect"] = *record.overall_affect;
    out += row.dump();
    out += '\n';
  }
  for (const auto& conv : corpus.conversations) {
    for (const auto& turn : conv.turns) {
      ordered_json row;
      row["kind"] = "turn";
      row["conversation_id"] = conv.conversation_id;
      row["speaker_id"] = turn.speaker_id;
      row["index"] = turn.index;
      row["text"] = turn.text;
      out += row.dump();
      out += '\n';
    }
  }
  return out;
}

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, corpus_to_jsonl(corpus));
}

Corpus filter_complete(const Corpus& corpus, FilterSummary* summary) {
  FilterSummary local;
  Corpus out;
  for (const auto& conv : corpus.conversations) {
    std::string reason;
    if (conv.participants.size() != 2 || conv.participants[0] == conv.participants[1]) {
      reason = "participants";
    } else {
      for (const auto& speaker_id : conv.participants) {
        const SpeakerRecord* record = corpus.find_speaker(speaker_id);
        if (record == nullptr) {
          reason = "missing_survey";
          break;
        }
        if (!record->complete()) {
          reason = "incomplete_survey";
          break;
        }
      }
    }
    if (reason.empty() && !conv.has_nonempty_transcript()) {
      reason = "empty_transcript";
    }
    if (reason.empty()) {
      out.conversations.push_back(conv);
      ++local.retained;
    } else {
      ++local.dropped;
      ++local.drop_reasons[reason];
    }
  }
  for (const auto& conv : out.conversations) {
    for (const auto& speaker_id : conv.participants) {
      auto it = corpus.speakers.find(speaker_id);
      if (it != corpus.speakers.end()) out.speakers.emplace(it->first, it->second);
    }
  }
  if (summary != nullptr) *summary = local;
  return out;
}

TurnWindow select_turn_window(const Conversation& conv, int start, int end) {
  if (start < 1 || end < start) {
    throw std::invalid_argument("select_turn_window: invalid window [" + std::to_string(start) +
                                "," + std::to_string(end) + "]");
  }
  TurnWindow window;
  const int length = static_cast<int>(conv.turns.size());
  if (length >= start) {
    const int last = std::min(end, length);  // 1-based inclusive
    window.turns.assign(conv.turns.begin() + (start - 1), conv.turns.begin() + last);
  } else {
    const int size = std::min(end - start + 1, length);
    window.turns.assign(conv.turns.end() - size, conv.turns.end());
    window.fallback = true;
  }
  return window;
}

}  // namespace parley
