#include <doctest.h>

#include <filesystem>
#include <set>

#include "parley/features.hpp"
#include "parley/mock_client.hpp"
#include "support/test_support.hpp"

using namespace parley;

namespace {

// Scripted single-reply client for summarization tests.
class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::string reply) : reply_(std::move(reply)) {}
  std::string do_complete(const std::string&, const std::vector<ChatMessage>& history,
                       std::uint64_t) override {
    last_request = history.empty() ? std::string() : history.front().content;
    return reply_;
  }
  std::string id() const override { return "scripted"; }
  std::string last_request;

 private:
  std::string reply_;
};

}  // namespace

TEST_CASE("affect_to_phrase: anchors, full table, errors") {
  CHECK(affect_to_phrase(5) == "neutral");
  CHECK(affect_to_phrase(1) == "extremely negative");
  CHECK(affect_to_phrase(9) == "extremely positive");
  CHECK(affect_to_phrase(3) == "moderately negative");
  CHECK_THROWS_AS(affect_to_phrase(0), std::out_of_range);
  CHECK_THROWS_AS(affect_to_phrase(10), std::out_of_range);

  SUBCASE("phrase(k) mirrors phrase(10-k) across the neutral midpoint") {
    for (int k = 1; k <= 9; ++k) {
      std::string low = affect_to_phrase(k);
      std::string high = affect_to_phrase(10 - k);
      if (k == 5) {
        CHECK(low == high);
        continue;
      }
      // same intensity adverb, opposite polarity
      const auto swap_polarity = [](std::string s) {
        const std::string neg = "negative", pos = "positive";
        const std::size_t at_neg = s.find(neg);
        if (at_neg != std::string::npos) return s.replace(at_neg, neg.size(), pos);
        const std::size_t at_pos = s.find(pos);
        REQUIRE(at_pos != std::string::npos);
        return s.replace(at_pos, pos.size(), neg);
      };
      CHECK(swap_polarity(low) == high);
    }
  }
  SUBCASE("monotone: scores 1..4 negative, 6..9 positive") {
    for (int k = 1; k <= 4; ++k) {
      CHECK(affect_to_phrase(k).find("negative") != std::string::npos);
    }
    for (int k = 6; k <= 9; ++k) {
      CHECK(affect_to_phrase(k).find("positive") != std::string::npos);
    }
  }
  SUBCASE("reverse lookup") {
    for (int k = 1; k <= 9; ++k) {
      CHECK(affect_score_from_phrase(affect_to_phrase(k)) == k);
    }
    CHECK(affect_score_from_phrase("cheery") == 0);
  }
}

TEST_CASE("summarize_topic: passthrough, truncation, request shape") {
  std::vector<Turn> window = {Turn{"a", 0, "we talked travel"}, Turn{"b", 1, "europe plans"}};

  SUBCASE("mock passthrough") {
    ScriptedClient client("travel plans Europe");
    CHECK(summarize_topic(window, client, "c1") == "travel plans Europe");
    // instruction prefix, then one utterance per line without speaker labels
    CHECK(client.last_request ==
          std::string(topic_instruction()) + "\nwe talked travel\neurope plans");
  }
  SUBCASE("seven-word reply truncated to four words") {
    ScriptedClient client("one two three four five six seven");
    CHECK(summarize_topic(window, client, "c1") == "one two three four");
  }
  SUBCASE("whitespace is trimmed") {
    ScriptedClient client("  cooking tips \n");
    CHECK(summarize_topic(window, client, "c1") == "cooking tips");
  }
  SUBCASE("empty window and empty reply are errors") {
    ScriptedClient client("x");
    CHECK_THROWS_AS(summarize_topic({}, client, "c1"), std::invalid_argument);
    ScriptedClient empty("   ");
    CHECK_THROWS_AS(summarize_topic(window, empty, "c1"), BackendError);
  }
  SUBCASE("backend failure carries the conversation id") {
    test::FlakyClient failing(0);
    CHECK_THROWS_WITH_AS(summarize_topic(window, failing, "conv9"),
                         doctest::Contains("conv9"), BackendError);
  }
}

TEST_CASE("extract_personas: one persona per retained speaker") {
  const Corpus corpus = load_corpus(test::fixture("corpus_small.jsonl"), CorpusFormat::jsonl);
  MockChatClient mock(3);

  const auto personas = extract_personas(corpus, mock);
  REQUIRE(personas.size() == 4);

  SUBCASE("demographics copied verbatim, affect verbalized") {
    for (const auto& p : personas) {
      const SpeakerRecord& rec = corpus.speakers.at(p.speaker_id);
      CHECK(p.age == *rec.age);
      CHECK(p.gender == *rec.sex);
      CHECK(p.affect_phrase == affect_to_phrase(*rec.overall_affect));
      CHECK_FALSE(p.topic_phrase.empty());
      const auto words = split_whitespace(p.topic_phrase);
      CHECK(words.size() <= 4);
    }
  }
  SUBCASE("both participants share the conversation topic") {
    CHECK(personas[0].source_conversation_id == "c1");
    CHECK(personas[1].source_conversation_id == "c1");
    CHECK(personas[0].topic_phrase == personas[1].topic_phrase);
    CHECK(personas[2].topic_phrase == personas[3].topic_phrase);
    // the two conversations are about different things
    CHECK(personas[0].topic_phrase != personas[2].topic_phrase);
  }
  SUBCASE("empty corpus yields an empty list") {
    Corpus empty;
    CHECK(extract_personas(empty, mock).empty());
  }
  SUBCASE("unfiltered corpus is rejected") {
    Corpus broken = corpus;
    broken.speakers["s1"].age.reset();
    CHECK_THROWS_AS(extract_personas(broken, mock), CorpusError);
  }
}

TEST_CASE("extract_personas: synthetic fixture count and parallel determinism") {
  test::SyntheticCorpusOptions options;
  options.conversations = 7;
  const Corpus corpus = test::make_synthetic_corpus(options);
  MockChatClient mock(3);

  ExtractOptions sequential;
  const auto personas = extract_personas(corpus, mock, sequential);
  CHECK(personas.size() == 14);

  ExtractOptions parallel;
  parallel.parallelism = 4;
  const auto parallel_personas = extract_personas(corpus, mock, parallel);
  REQUIRE(parallel_personas.size() == personas.size());
  for (std::size_t i = 0; i < personas.size(); ++i) {
    CHECK(parallel_personas[i].speaker_id == personas[i].speaker_id);
    CHECK(parallel_personas[i].topic_phrase == personas[i].topic_phrase);
  }
}

TEST_CASE("persona cache round-trips") {
  const Corpus corpus = load_corpus(test::fixture("corpus_small.jsonl"), CorpusFormat::jsonl);
  MockChatClient mock(3);
  const auto personas = extract_personas(corpus, mock);

  const auto path = std::filesystem::temp_directory_path() / "parley_personas.jsonl";
  write_persona_cache(personas, path);
  const auto loaded = load_persona_cache(path);
  REQUIRE(loaded.size() == personas.size());
  for (std::size_t i = 0; i < personas.size(); ++i) {
    CHECK(loaded[i].speaker_id == personas[i].speaker_id);
    CHECK(loaded[i].age == personas[i].age);
    CHECK(loaded[i].gender == personas[i].gender);
    CHECK(loaded[i].affect_phrase == personas[i].affect_phrase);
    CHECK(loaded[i].topic_phrase == personas[i].topic_phrase);
    CHECK(loaded[i].source_conversation_id == personas[i].source_conversation_id);
  }

  write_file(path, "{\"speaker_id\":\"x\"}\n");
  CHECK_THROWS_AS(load_persona_cache(path), CorpusError);
}
