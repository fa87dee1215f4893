#include <doctest.h>

#include "parley/prompts.hpp"
#include "support/test_support.hpp"

using namespace parley;

namespace {

PersonaFeatures make_persona() {
  PersonaFeatures p;
  p.speaker_id = "s1";
  p.age = 25;
  p.gender = Sex::female;
  p.affect_phrase = "neutral";
  p.topic_phrase = "college football games";
  p.source_conversation_id = "c1";
  return p;
}

PromptVariantSet best_variants(const PromptRegistry& registry) {
  PromptVariantSet v = PromptVariantSet::baseline(registry.axes());
  v.choose("demographics", "present");
  v.choose("affect", "present");
  v.choose("formality", "B");
  v.choose("length", "present");
  v.choose("topic", "present");
  return v;
}

}  // namespace

TEST_CASE("registry: built-in axes") {
  const PromptRegistry registry = PromptRegistry::defaults();
  const PromptAxis* formality = registry.find_axis("formality");
  REQUIRE(formality != nullptr);
  CHECK(formality->variants.size() == 3);
  CHECK(formality->find("A")->absent());
  CHECK(formality->find("B")->text ==
        "Please try to use informal language, the way people talk casually.");
  CHECK(formality->find("C")->text == "Please talk like a normal person holding a conversation.");

  for (const char* axis : {"demographics", "affect", "length", "topic"}) {
    REQUIRE(registry.find_axis(axis) != nullptr);
    CHECK(registry.find_axis(axis)->absent_variant() != nullptr);
  }
}

TEST_CASE("render_system: best variant set carries every persona fragment") {
  const PromptRegistry registry = PromptRegistry::defaults();
  const PersonaFeatures persona = make_persona();
  const std::string text = registry.render_system(persona, best_variants(registry));

  CHECK(text.find("Imagine that you are a female and 25 years old.") != std::string::npos);
  CHECK(text.find("You feel neutral feelings.") != std::string::npos);
  CHECK(text.find("You should not explicitly say that you have these characteristics") !=
        std::string::npos);
  CHECK(text.find("Please try to use informal language, the way people talk casually.") !=
        std::string::npos);
  CHECK(text.find("Please say at most one or two sentences per turn.") != std::string::npos);
  CHECK(text.find('[') == std::string::npos);
}

TEST_CASE("render_system: baseline renders no persona content") {
  const PromptRegistry registry = PromptRegistry::defaults();
  const PromptVariantSet baseline = PromptVariantSet::baseline(registry.axes());
  const std::string text = registry.render_system(make_persona(), baseline);
  CHECK(text.empty());
}

TEST_CASE("render_system: deterministic and injective on age") {
  const PromptRegistry registry = PromptRegistry::defaults();
  PersonaFeatures a = make_persona();
  PersonaFeatures b = make_persona();
  b.age = 26;
  const PromptVariantSet variants = best_variants(registry);
  CHECK(registry.render_system(a, variants) == registry.render_system(a, variants));
  CHECK(registry.render_system(a, variants) != registry.render_system(b, variants));
}

TEST_CASE("render_system: [Topic] in a system fragment is a rendering error") {
  PromptRegistry registry = PromptRegistry::from_json_text(R"({
    "extra_axes": [{"name": "bad", "role": "system",
                    "variants": [{"id": "absent", "text": ""},
                                 {"id": "on", "text": "Mention [Topic] often."}]}]
  })");
  PromptVariantSet variants = PromptVariantSet::baseline(registry.axes());
  variants.choose("bad", "on");
  CHECK_THROWS_AS(registry.render_system(make_persona(), variants), PromptError);
}

TEST_CASE("render_opening: fixed sentence plus the topic fragment") {
  const PromptRegistry registry = PromptRegistry::defaults();
  const PersonaFeatures persona = make_persona();

  SUBCASE("topic axis on") {
    const std::string text = registry.render_opening(persona, best_variants(registry));
    CHECK(text.find("Talk about whatever you like, just imagine you have met someone at a social "
                    "event and you're getting to know each other.") == 0);
    CHECK(text.find("following topics: college football games.") != std::string::npos);
  }
  SUBCASE("topic axis absent") {
    const PromptVariantSet baseline = PromptVariantSet::baseline(registry.axes());
    const std::string text = registry.render_opening(persona, baseline);
    CHECK(text ==
          "Talk about whatever you like, just imagine you have met someone at a social event and "
          "you're getting to know each other.");
  }
  SUBCASE("empty topic with the topic axis on is an error") {
    PersonaFeatures persona_without_topic = persona;
    persona_without_topic.topic_phrase = "  ";
    CHECK_THROWS_AS(registry.render_opening(persona_without_topic, best_variants(registry)),
                    PromptError);
  }
}

TEST_CASE("variant sets: keys, baselines, unknown axes") {
  const PromptRegistry registry = PromptRegistry::defaults();
  PromptVariantSet variants = PromptVariantSet::baseline(registry.axes());
  CHECK(variants.key() == "affect=absent;demographics=absent;formality=A;length=absent;topic=absent");

  variants.choose("formality", "B");
  CHECK(variants.key().find("formality=B") != std::string::npos);

  PromptVariantSet bad = variants;
  bad.choose("nosuch", "x");
  CHECK_THROWS_AS(registry.render_system(make_persona(), bad), PromptError);

  PromptVariantSet bad_variant = variants;
  bad_variant.choose("formality", "Z");
  CHECK_THROWS_AS(registry.render_system(make_persona(), bad_variant), PromptError);
}

TEST_CASE("registry config: custom axes from JSON and validation") {
  SUBCASE("extra axis appears and renders") {
    const PromptRegistry registry = PromptRegistry::from_json_text(R"({
      "extra_axes": [{"name": "pace", "role": "system",
                      "variants": [{"id": "absent", "text": ""},
                                   {"id": "slow", "text": "Take your time answering."}]}]
    })");
    REQUIRE(registry.find_axis("pace") != nullptr);
    PromptVariantSet variants = PromptVariantSet::baseline(registry.axes());
    variants.choose("pace", "slow");
    const std::string text = registry.render_system(make_persona(), variants);
    CHECK(text == "Take your time answering.");
  }
  SUBCASE("full replacement must keep an absent variant per axis") {
    CHECK_THROWS_AS(PromptRegistry::from_json_text(R"({
      "axes": [{"name": "only", "role": "system",
                "variants": [{"id": "on", "text": "Always on."}]}]
    })"),
                    ConfigError);
  }
  SUBCASE("duplicate variant ids are rejected") {
    CHECK_THROWS_AS(PromptRegistry::from_json_text(R"({
      "axes": [{"name": "dup", "role": "system",
                "variants": [{"id": "x", "text": ""}, {"id": "x", "text": "again"}]}]
    })"),
                    ConfigError);
  }
  SUBCASE("registry JSON round-trips") {
    const PromptRegistry registry = PromptRegistry::defaults();
    const PromptRegistry reparsed = PromptRegistry::from_json_text(registry.to_json());
    CHECK(reparsed.to_json() == registry.to_json());
  }
}
