#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "parley/lexica.hpp"
#include "parley/util.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace parley;
using test::oracle_category_count;
using test::oracle_token_count;
using test::oracle_topic_distribution;
using test::oracle_weighted;

TEST_CASE("tokenize: rule application") {
  CHECK(tokenize("I'm fine.") == std::vector<std::string>{"i'm", "fine"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t\n ").empty());
  CHECK(tokenize("Hello, WORLD!!") == std::vector<std::string>{"hello", "world"});
  CHECK(tokenize("'tis 'quoted'") == std::vector<std::string>{"tis", "quoted"});
  CHECK(tokenize("co-op stays") == std::vector<std::string>{"co-op", "stays"});
  CHECK(tokenize("... --- !!!").empty());
}

TEST_CASE("tokenize: re-tokenizing the joined output is a fixed point") {
  std::mt19937_64 rng(42);
  const std::string charset = "abcDEF'!.,-  \t";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const std::size_t len = rng() % 1000;
    for (std::size_t i = 0; i < len; ++i) text += charset[rng() % charset.size()];
    const auto once = tokenize(text);
    const auto twice = tokenize(join(once, " "));
    CHECK(once == twice);
  }
}

TEST_CASE("score_weighted: worked examples") {
  WeightedLexicon lex;
  lex.intercept = 20.0;
  lex.entries["old"] = 10.0;

  CHECK(score_weighted({}, lex) == doctest::Approx(20.0));
  const std::vector<std::string> tokens = {"old", "old", "new", "new"};
  CHECK(score_weighted(tokens, lex) == doctest::Approx(25.0));
}

TEST_CASE("score_weighted: matches the brute-force oracle on random instances") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> weight(-50.0, 50.0);
  for (int trial = 0; trial < 300; ++trial) {
    WeightedLexicon lex;
    lex.intercept = weight(rng);
    const std::size_t entries = rng() % 51;
    for (std::size_t i = 0; i < entries; ++i) {
      lex.entries["tok" + std::to_string(rng() % 60)] = weight(rng);
    }
    std::vector<std::string> tokens;
    const std::size_t n = rng() % 201;
    for (std::size_t i = 0; i < n; ++i) tokens.push_back("tok" + std::to_string(rng() % 60));

    const double got = score_weighted(tokens, lex);
    const double want = oracle_weighted(tokens, lex);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("score_weighted is affine in relative frequencies over concatenation") {
  WeightedLexicon lex;
  lex.intercept = 3.0;
  lex.entries["x"] = 2.0;
  lex.entries["y"] = -1.0;
  const std::vector<std::string> a = {"x", "y", "z"};
  const std::vector<std::string> b = {"x", "x", "y", "w", "w"};
  std::vector<std::string> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());

  const double combined =
      lex.intercept + (3.0 * (score_weighted(a, lex) - lex.intercept) +
                       5.0 * (score_weighted(b, lex) - lex.intercept)) /
                          8.0;
  CHECK(score_weighted(ab, lex) == doctest::Approx(combined).epsilon(1e-12));
}

TEST_CASE("discretize_gender: sign with the zero tie pinned to 1") {
  CHECK(discretize_gender(0.37) == 1);
  CHECK(discretize_gender(-2.1) == -1);
  CHECK(discretize_gender(0.0) == 1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const int g = discretize_gender(u(rng));
    CHECK((g == 1 || g == -1));
  }
}

TEST_CASE("category dictionary: .dic fixture with wildcard and multi-category entry") {
  const CategoryDictionary dict = CategoryDictionary::load_dic(test::fixture("categories.dic"));
  CHECK(dict.categories().size() == 7);
  CHECK(dict.has_category("affect"));
  CHECK(dict.has_category("informal"));

  // "cried" sits in five categories
  const std::vector<std::string> cried = {"she", "cried"};
  for (const char* category : {"sadness", "negemo", "affect", "verbs", "pastfocus"}) {
    CHECK(dict.score(cried, category) == doctest::Approx(0.5));
  }
  CHECK(dict.score(cried, "informal") == doctest::Approx(0.0));

  // wildcard happ* catches happy and happiness
  const std::vector<std::string> happs = {"happy", "happiness", "sad"};
  CHECK(dict.score(happs, "affect") == doctest::Approx(2.0 / 3.0));

  CHECK(dict.score({}, "affect") == doctest::Approx(0.0));
  CHECK_THROWS_AS(dict.score(cried, "nosuch"), LexiconError);
}

TEST_CASE("category dictionary: parse errors") {
  SUBCASE("missing header") {
    std::istringstream in("cried\t1\n");
    CHECK_THROWS_AS(CategoryDictionary::parse_dic(in, "mem"), LexiconError);
  }
  SUBCASE("pattern with undeclared category") {
    std::istringstream in("%\n1\taffect\n%\ncried\t2\n");
    CHECK_THROWS_AS(CategoryDictionary::parse_dic(in, "mem"), LexiconError);
  }
  SUBCASE("pattern with no category") {
    std::istringstream in("%\n1\taffect\n%\ncried\n");
    CHECK_THROWS_AS(CategoryDictionary::parse_dic(in, "mem"), LexiconError);
  }
}

TEST_CASE("score_category: matches the naive oracle on random instances") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::ostringstream dic;
    dic << "%\n1\tcata\n2\tcatb\n3\tcatc\n%\n";
    const std::size_t patterns = 1 + rng() % 20;
    for (std::size_t i = 0; i < patterns; ++i) {
      std::string pattern = "tok" + std::to_string(rng() % 20);
      if (rng() % 3 == 0) pattern = pattern.substr(0, 3 + rng() % 3) + "*";
      dic << pattern << '\t' << (1 + rng() % 3);
      if (rng() % 2 == 0) dic << ' ' << (1 + rng() % 3);
      dic << '\n';
    }
    std::istringstream in(dic.str());
    const CategoryDictionary dict = CategoryDictionary::parse_dic(in, "mem");

    std::vector<std::string> tokens;
    const std::size_t n = rng() % 120;
    for (std::size_t i = 0; i < n; ++i) tokens.push_back("tok" + std::to_string(rng() % 25));

    for (const std::string category : {"cata", "catb", "catc"}) {
      const std::size_t got = dict.match_count(tokens, category);
      const std::size_t want = oracle_category_count(tokens, dict, category);
      CHECK(got == want);
      if (!tokens.empty()) {
        CHECK(dict.score(tokens, category) ==
              doctest::Approx(static_cast<double>(want) / static_cast<double>(tokens.size())));
      }
    }
  }
}

TEST_CASE("topic_distribution: worked examples") {
  const TopicLexicon lex = load_topic_lexicon_csv(test::fixture("topic_lexicon.csv"));
  CHECK(lex.topic_count == 5);

  SUBCASE("no in-lexicon tokens -> zero vector") {
    const auto v = topic_distribution(std::vector<std::string>{"nothing", "matches"}, lex);
    CHECK(v.size() == 5);
    CHECK(v.cwiseAbs().sum() == doctest::Approx(0.0));
  }
  SUBCASE("single token with p(t0|w)=1 -> one-hot") {
    const auto v = topic_distribution(std::vector<std::string>{"cooking"}, lex);
    CHECK(v[0] == doctest::Approx(1.0));
    CHECK(v.sum() == doctest::Approx(1.0));
  }
  SUBCASE("hand-computed weighted sum, renormalized") {
    TopicLexicon toy;
    toy.topic_count = 3;
    toy.weights["a"] = {{0, 0.5}, {1, 0.5}};
    toy.weights["b"] = {{2, 1.0}};
    // document: a a b x x -> relfreq a=2/5, b=1/5
    // raw: t0 = .4*.5=.2, t1=.2, t2=.2 -> normalized uniform
    const auto v = topic_distribution(std::vector<std::string>{"a", "a", "b", "x", "x"}, toy);
    CHECK(v[0] == doctest::Approx(1.0 / 3.0));
    CHECK(v[1] == doctest::Approx(1.0 / 3.0));
    CHECK(v[2] == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("topic_distribution: matches the brute-force oracle and normalizes") {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> prob(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    TopicLexicon lex;
    lex.topic_count = 3 + static_cast<int>(rng() % 8);
    const std::size_t entries = rng() % 40;
    for (std::size_t i = 0; i < entries; ++i) {
      auto& sparse = lex.weights["tok" + std::to_string(rng() % 30)];
      sparse.emplace_back(static_cast<int>(rng() % lex.topic_count), prob(rng));
    }
    std::vector<std::string> tokens;
    const std::size_t n = rng() % 150;
    for (std::size_t i = 0; i < n; ++i) tokens.push_back("tok" + std::to_string(rng() % 35));

    const Eigen::VectorXd got = topic_distribution(tokens, lex);
    const std::vector<double> want = oracle_topic_distribution(tokens, lex);
    REQUIRE(got.size() == static_cast<Eigen::Index>(want.size()));
    double sum = 0.0;
    for (Eigen::Index i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-12));
      CHECK(got[i] >= 0.0);
      sum += got[i];
    }
    if (sum > 0.0) CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("turn_length: counts tokens") {
  CHECK(turn_length(Turn{"s", 0, "Hi there"}) == 2);
  CHECK(turn_length(Turn{"s", 0, ""}) == 0);

  std::mt19937_64 rng(31);
  const std::string charset = "abc XY.z' !-";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const std::size_t len = rng() % 300;
    for (std::size_t i = 0; i < len; ++i) text += charset[rng() % charset.size()];
    CHECK(static_cast<std::size_t>(turn_length(Turn{"s", 0, text})) == oracle_token_count(text));
  }
}

TEST_CASE("weighted lexicon CSV: intercept row and header handling") {
  const WeightedLexicon lex = load_weighted_lexicon_csv(test::fixture("age_lexicon.csv"), "age");
  CHECK(lex.intercept == doctest::Approx(20.0));
  CHECK(lex.entries.at("oldtimer") == doctest::Approx(200.0));
  CHECK(lex.entries.size() == 1);
}

TEST_CASE("score_speaker: speaker-level concatenation and per-turn samples") {
  Corpus corpus;
  Conversation conv;
  conv.conversation_id = "c1";
  conv.participants = {"sp", "other"};
  conv.turns = {Turn{"sp", 0, "old old"}, Turn{"other", 1, "hi"}, Turn{"sp", 2, "new new"}};
  corpus.conversations.push_back(conv);

  ScorerSet scorers;
  WeightedLexicon age;
  age.intercept = 20.0;
  age.entries["old"] = 10.0;
  scorers.age = age;

  SUBCASE("concatenation then scoring") {
    const auto samples = score_speaker(corpus.conversations, "sp", scorers);
    const FeatureSample* age_sample = nullptr;
    std::size_t length_samples = 0;
    for (const auto& s : samples) {
      if (s.feature == "age") age_sample = &s;
      if (s.feature == "length") ++length_samples;
    }
    REQUIRE(age_sample != nullptr);
    CHECK(age_sample->value == doctest::Approx(25.0));  // 20 + 10 * 2/4
    CHECK(age_sample->level == Level::speaker);
    CHECK(length_samples == 2);
  }
  SUBCASE("single-turn speaker: speaker-level equals turn-level") {
    const auto samples = score_speaker(corpus.conversations, "other", scorers);
    double age_value = 0.0;
    for (const auto& s : samples) {
      if (s.feature == "age") age_value = s.value;
    }
    std::vector<std::string> tokens = tokenize("hi");
    CHECK(age_value == doctest::Approx(score_weighted(tokens, *scorers.age)));
  }
  SUBCASE("unknown speaker") {
    CHECK_THROWS_AS(score_speaker(corpus.conversations, "nobody", scorers), LexiconError);
  }
  SUBCASE("scoring is pure: conversation order does not change speaker values") {
    Corpus shuffled = corpus;
    Conversation extra;
    extra.conversation_id = "c0";
    extra.participants = {"x", "y"};
    extra.turns = {Turn{"x", 0, "zzz"}, Turn{"y", 1, "qqq"}};
    shuffled.conversations.insert(shuffled.conversations.begin(), extra);
    const auto a = score_speaker(corpus.conversations, "sp", scorers);
    const auto b = score_speaker(shuffled.conversations, "sp", scorers);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].value == b[i].value);
      CHECK(a[i].feature == b[i].feature);
    }
  }
}

TEST_CASE("score_conversations: full fixture stack produces every feature") {
  const Corpus corpus = load_corpus(test::fixture("corpus_small.jsonl"), CorpusFormat::jsonl);
  const ScorerSet scorers = test::make_test_scorers();
  const SampleTable table = score_conversations(corpus.conversations, scorers);

  for (const char* feature : {"age", "gender", "affect", "topic"}) {
    REQUIRE(table.find(feature) != nullptr);
    CHECK(table.find(feature)->size() == 4);  // one per speaker
  }
  CHECK(table.find("length")->size() == 8);    // one per turn
  CHECK(table.find("informal")->size() == 8);
  for (const auto& s : *table.find("topic")) {
    CHECK(s.is_vector());
    CHECK(s.vec.size() == 5);
  }
}
