#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "parley/corpus.hpp"
#include "parley/util.hpp"
#include "support/test_support.hpp"

using namespace parley;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  write_file(path, content);
  return path;
}

Corpus make_conv(const std::string& id, const std::vector<std::string>& speakers, int turns) {
  Corpus corpus;
  Conversation conv;
  conv.conversation_id = id;
  conv.participants = speakers;
  for (int i = 0; i < turns; ++i) {
    conv.turns.push_back(Turn{speakers[static_cast<std::size_t>(i) % speakers.size()], i,
                              "turn " + std::to_string(i)});
  }
  corpus.conversations.push_back(std::move(conv));
  for (const auto& s : speakers) {
    SpeakerRecord rec;
    rec.speaker_id = s;
    rec.age = 30;
    rec.sex = Sex::female;
    rec.overall_affect = 5;
    corpus.speakers[s] = rec;
  }
  return corpus;
}

}  // namespace

TEST_CASE("load_corpus: empty JSONL yields an empty corpus") {
  const auto path = temp_file("parley_empty.jsonl", "");
  const Corpus corpus = load_corpus(path, CorpusFormat::jsonl);
  CHECK(corpus.conversations.empty());
  CHECK(corpus.speakers.empty());
}

TEST_CASE("load_corpus: two-conversation fixture") {
  const Corpus corpus = load_corpus(test::fixture("corpus_small.jsonl"), CorpusFormat::jsonl);
  CHECK(corpus.conversations.size() == 2);
  CHECK(corpus.speakers.size() == 4);
  CHECK(corpus.total_turns() == 8);
  const Conversation& c1 = corpus.conversations[0];
  CHECK(c1.conversation_id == "c1");
  CHECK(c1.participants == std::vector<std::string>{"s1", "s2"});
  // empty source text survives loading
  CHECK(corpus.conversations[1].turns[3].text.empty());
}

TEST_CASE("load_corpus: out-of-range affect is loaded and flagged, not rejected") {
  const auto path = temp_file(
      "parley_affect.jsonl",
      R"({"kind":"speaker","speaker_id":"x","age":30,"sex":"male","overall_affect":11})"
      "\n");
  const Corpus corpus = load_corpus(path, CorpusFormat::jsonl);
  REQUIRE(corpus.speakers.count("x") == 1);
  const SpeakerRecord& rec = corpus.speakers.at("x");
  CHECK(rec.overall_affect == 11);
  CHECK_FALSE(rec.complete());
  CHECK(std::find(rec.flags.begin(), rec.flags.end(), "invalid_range:overall_affect") !=
        rec.flags.end());
}

TEST_CASE("load_corpus: malformed rows report the line number") {
  const auto path = temp_file("parley_bad.jsonl",
                              "{\"kind\":\"speaker\",\"speaker_id\":\"a\"}\nnot json\n");
  CHECK_THROWS_WITH_AS(load_corpus(path, CorpusFormat::jsonl),
                       doctest::Contains(":2:"), CorpusError);
}

TEST_CASE("load_corpus: non-increasing turn index is rejected") {
  const std::string rows =
      R"({"kind":"turn","conversation_id":"c","speaker_id":"a","index":0,"text":"x"})"
      "\n"
      R"({"kind":"turn","conversation_id":"c","speaker_id":"b","index":0,"text":"y"})"
      "\n";
  const auto path = temp_file("parley_dup.jsonl", rows);
  CHECK_THROWS_AS(load_corpus(path, CorpusFormat::jsonl), CorpusError);
}

TEST_CASE("load_corpus: unreadable file") {
  CHECK_THROWS_AS(load_corpus("/nonexistent/nowhere.jsonl", CorpusFormat::jsonl), CorpusError);
}

TEST_CASE("load_corpus: interleaved conversation rows group by id") {
  const std::string rows =
      R"({"kind":"turn","conversation_id":"x","speaker_id":"a","index":0,"text":"one"})"
      "\n"
      R"({"kind":"turn","conversation_id":"y","speaker_id":"c","index":0,"text":"uno"})"
      "\n"
      R"({"kind":"turn","conversation_id":"x","speaker_id":"b","index":1,"text":"two"})"
      "\n"
      R"({"kind":"turn","conversation_id":"y","speaker_id":"d","index":1,"text":"dos"})"
      "\n";
  const auto path = temp_file("parley_interleaved.jsonl", rows);
  const Corpus corpus = load_corpus(path, CorpusFormat::jsonl);
  REQUIRE(corpus.conversations.size() == 2);
  CHECK(corpus.conversations[0].conversation_id == "x");  // first-appearance order
  CHECK(corpus.conversations[0].turns.size() == 2);
  CHECK(corpus.conversations[1].turns.size() == 2);
  CHECK(corpus.conversations[1].participants == std::vector<std::string>{"c", "d"});
}

TEST_CASE("load_corpus: csv-dir with transcripts beside surveys.csv") {
  const auto dir = std::filesystem::temp_directory_path() / "parley_flat_csvdir";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "surveys.csv",
             "speaker_id,age,sex,overall_affect\na,30,female,5\nb,40,male,6\n");
  write_file(dir / "k1.csv", "index,speaker_id,text\n0,a,hello there\n1,b,hi back\n");
  const Corpus corpus = load_corpus(dir, CorpusFormat::csv_dir);
  REQUIRE(corpus.conversations.size() == 1);
  CHECK(corpus.conversations[0].conversation_id == "k1");
  CHECK(corpus.speakers.size() == 2);
}

TEST_CASE("corpus JSONL round-trip is bit-identical") {
  const std::string original = read_file(test::fixture("corpus_small.jsonl"));
  const Corpus corpus = load_corpus(test::fixture("corpus_small.jsonl"), CorpusFormat::jsonl);
  CHECK(corpus_to_jsonl(corpus) == original);

  // and serialization is a fixed point of load/write
  const auto path = temp_file("parley_rt.jsonl", corpus_to_jsonl(corpus));
  const Corpus reloaded = load_corpus(path, CorpusFormat::jsonl);
  CHECK(corpus_to_jsonl(reloaded) == original);
}

TEST_CASE("load_corpus: csv-dir format") {
  const Corpus corpus = load_corpus(test::fixture("csvdir"), CorpusFormat::csv_dir);
  CHECK(corpus.conversations.size() == 2);
  CHECK(corpus.speakers.size() == 4);
  CHECK(corpus.speakers.at("s3").age.has_value() == false);
  CHECK(corpus.speakers.at("s4").overall_affect == 11);
  // age outside the reference range warns but stays usable
  const auto& flags = corpus.speakers.at("s4").flags;
  CHECK(std::find(flags.begin(), flags.end(), "age_outside_reference_range") != flags.end());
  // quoted text keeps its commas
  CHECK(corpus.conversations[0].turns[0].text == "Hi there, how are you?");

  FilterSummary summary;
  const Corpus filtered = filter_complete(corpus, &summary);
  CHECK(summary.retained == 1);
  CHECK(summary.dropped == 1);
  CHECK(summary.drop_reasons.at("incomplete_survey") == 1);
}

TEST_CASE("filter_complete: missing age drops the whole conversation") {
  Corpus corpus = make_conv("c1", {"a", "b"}, 4);
  corpus.speakers["a"].age.reset();
  const Corpus filtered = filter_complete(corpus);
  CHECK(filtered.conversations.empty());
  CHECK(filtered.speakers.empty());
}

TEST_CASE("filter_complete: complete corpus is unchanged and filtering is idempotent") {
  const Corpus corpus = load_corpus(test::fixture("corpus_small.jsonl"), CorpusFormat::jsonl);
  const Corpus once = filter_complete(corpus);
  CHECK(once.conversations.size() == corpus.conversations.size());
  const Corpus twice = filter_complete(once);
  CHECK(corpus_to_jsonl(once) == corpus_to_jsonl(twice));
}

TEST_CASE("filter_complete: synthetic fixture with hand-counted defects") {
  // 10 conversations; three defective: missing affect, missing survey, empty transcript
  Corpus corpus;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "k" + std::to_string(i);
    Corpus one = make_conv(id, {id + "a", id + "b"}, 4);
    corpus.conversations.push_back(one.conversations[0]);
    for (auto& [sid, rec] : one.speakers) corpus.speakers[sid] = rec;
  }
  corpus.speakers["k1a"].overall_affect.reset();
  corpus.speakers.erase("k4b");
  for (auto& turn : corpus.conversations[7].turns) turn.text = "  ";

  FilterSummary summary;
  const Corpus filtered = filter_complete(corpus, &summary);
  CHECK(summary.retained == 7);
  CHECK(summary.dropped == 3);
  CHECK(summary.drop_reasons.at("incomplete_survey") == 1);
  CHECK(summary.drop_reasons.at("missing_survey") == 1);
  CHECK(summary.drop_reasons.at("empty_transcript") == 1);
}

TEST_CASE("select_turn_window: boundary behavior") {
  Corpus corpus = make_conv("c", {"a", "b"}, 100);
  const Conversation& conv = corpus.conversations[0];

  SUBCASE("100-turn conversation, (51,70) -> ordinals 51..70") {
    const TurnWindow window = select_turn_window(conv, 51, 70);
    REQUIRE(window.turns.size() == 20);
    CHECK_FALSE(window.fallback);
    CHECK(window.turns.front().index == 50);  // 0-based internal
    CHECK(window.turns.back().index == 69);
  }
  SUBCASE("70-turn conversation, (51,70) -> last 20 turns, no fallback") {
    Corpus seventy = make_conv("c", {"a", "b"}, 70);
    const TurnWindow window = select_turn_window(seventy.conversations[0], 51, 70);
    REQUIRE(window.turns.size() == 20);
    CHECK_FALSE(window.fallback);
    CHECK(window.turns.back().index == 69);
  }
  SUBCASE("10-turn conversation, (51,70) -> all 10 turns with the fallback flag") {
    Corpus ten = make_conv("c", {"a", "b"}, 10);
    const TurnWindow window = select_turn_window(ten.conversations[0], 51, 70);
    CHECK(window.turns.size() == 10);
    CHECK(window.fallback);
  }
  SUBCASE("window never leaks ordinals outside [start,end] unless fallback") {
    for (int len : {1, 5, 50, 51, 60, 71, 100}) {
      Corpus c = make_conv("c", {"a", "b"}, len);
      const TurnWindow window = select_turn_window(c.conversations[0], 51, 70);
      if (!window.fallback) {
        for (const Turn& turn : window.turns) {
          CHECK(turn.index + 1 >= 51);
          CHECK(turn.index + 1 <= 70);
        }
      }
    }
  }
  SUBCASE("invalid windows are rejected") {
    CHECK_THROWS_AS(select_turn_window(conv, 0, 10), std::invalid_argument);
    CHECK_THROWS_AS(select_turn_window(conv, 5, 4), std::invalid_argument);
  }
}
