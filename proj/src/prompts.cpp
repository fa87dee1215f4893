#include "parley/prompts.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "parley/util.hpp"

namespace parley {
namespace {

using ordered_json = nlohmann::ordered_json;

const char* kDisclaimer =
    "You should not explicitly say that you have these characteristics, but your conversation "
    "should be typical of someone with these characteristics.";

const char* kOpeningBase =
    "Talk about whatever you like, just imagine you have met someone at a social event and "
    "you're getting to know each other.";

void replace_all(std::string& text, std::string_view needle, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

// Any surviving [Word] token is an unresolved placeholder.
void check_no_placeholders(const std::string& text, const std::string& context) {
  std::size_t open = 0;
  while ((open = text.find('[', open)) != std::string::npos) {
    std::size_t close = text.find(']', open + 1);
    if (close == std::string::npos) return;
    std::string inner = text.substr(open + 1, close - open - 1);
    if (!inner.empty() &&
        std::all_of(inner.begin(), inner.end(),
                    [](unsigned char c) { return std::isalpha(c) != 0; })) {
      throw PromptError("unresolved placeholder [" + inner + "] in " + context);
    }
    open = close + 1;
  }
}

void append_sentence(std::string& text, const std::string& sentence) {
  if (sentence.empty()) return;
  if (!text.empty()) text += ' ';
  text += sentence;
}

PromptRole role_from_string(const std::string& s) {
  if (s == "system") return PromptRole::system;
  if (s == "opening") return PromptRole::opening;
  throw ConfigError("unknown prompt role: '" + s + "'");
}

std::string role_to_string(PromptRole role) {
  return role == PromptRole::system ? "system" : "opening";
}

}  // namespace

const PromptFragment* PromptAxis::find(std::string_view variant_id) const {
  for (const auto& fragment : variants) {
    if (fragment.id == variant_id) return &fragment;
  }
  return nullptr;
}

const PromptFragment* PromptAxis::absent_variant() const {
  for (const auto& fragment : variants) {
    if (fragment.absent()) return &fragment;
  }
  return nullptr;
}

void PromptVariantSet::choose(const std::string& axis, const std::string& variant_id) {
  choices_[axis] = variant_id;
}

const std::string* PromptVariantSet::choice(const std::string& axis) const {
  auto it = choices_.find(axis);
  return it == choices_.end() ? nullptr : &it->second;
}

std::string PromptVariantSet::key() const {
  std::string out;
  for (const auto& [axis, id] : choices_) {
    if (!out.empty()) out += ';';
    out += axis;
    out += '=';
    out += id;
  }
  return out;
}

PromptVariantSet PromptVariantSet::baseline(const std::vector<PromptAxis>& axes) {
  PromptVariantSet set;
  for (const auto& axis : axes) {
    const PromptFragment* absent = axis.absent_variant();
    if (absent == nullptr) {
      throw PromptError("axis '" + axis.name + "' has no absent variant");
    }
    set.choose(axis.name, absent->id);
  }
  return set;
}

PromptRegistry PromptRegistry::defaults() {
  PromptRegistry registry;
  registry.skeleton_ = "";
  registry.disclaimer_ = kDisclaimer;
  registry.opening_base_ = kOpeningBase;

  registry.axes_.push_back(PromptAxis{
      "demographics",
      PromptRole::system,
      {{"absent", ""}, {"present", "Imagine that you are a [Gender] and [Age] years old."}}});
  registry.axes_.push_back(PromptAxis{
      "affect", PromptRole::system, {{"absent", ""}, {"present", "You feel [Affect] feelings."}}});
  registry.axes_.push_back(PromptAxis{
      "formality",
      PromptRole::system,
      {{"A", ""},
       {"B", "Please try to use informal language, the way people talk casually."},
       {"C", "Please talk like a normal person holding a conversation."}}});
  registry.axes_.push_back(PromptAxis{
      "length",
      PromptRole::system,
      {{"absent", ""}, {"present", "Please say at most one or two sentences per turn."}}});
  registry.axes_.push_back(PromptAxis{
      "topic",
      PromptRole::opening,
      {{"absent", ""},
       {"present",
        "If it fits the conversation, you should talk about one of the following topics: "
        "[Topic]."}}});

  registry.validate();
  return registry;
}

PromptRegistry PromptRegistry::from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed prompt registry JSON: ") + e.what());
  }

  PromptRegistry registry = defaults();
  if (j.contains("skeleton")) registry.skeleton_ = j["skeleton"].get<std::string>();
  if (j.contains("disclaimer")) registry.disclaimer_ = j["disclaimer"].get<std::string>();
  if (j.contains("opening")) registry.opening_base_ = j["opening"].get<std::string>();

  auto parse_axis = [](const ordered_json& a) {
    PromptAxis axis;
    axis.name = a.at("name").get<std::string>();
    axis.role = role_from_string(a.value("role", "system"));
    for (const auto& v : a.at("variants")) {
      axis.variants.push_back({v.at("id").get<std::string>(), v.value("text", "")});
    }
    return axis;
  };

  if (j.contains("axes")) {
    registry.axes_.clear();
    for (const auto& a : j["axes"]) registry.axes_.push_back(parse_axis(a));
  }
  if (j.contains("extra_axes")) {
    for (const auto& a : j["extra_axes"]) registry.axes_.push_back(parse_axis(a));
  }
  registry.validate();
  return registry;
}

PromptRegistry PromptRegistry::from_json_file(const std::filesystem::path& path) {
  return from_json_text(read_file(path));
}

std::string PromptRegistry::to_json() const {
  ordered_json j;
  j["skeleton"] = skeleton_;
  j["disclaimer"] = disclaimer_;
  j["opening"] = opening_base_;
  j["axes"] = ordered_json::array();
  for (const auto& axis : axes_) {
    ordered_json a;
    a["name"] = axis.name;
    a["role"] = role_to_string(axis.role);
    a["variants"] = ordered_json::array();
    for (const auto& v : axis.variants) {
      ordered_json f;
      f["id"] = v.id;
      f["text"] = v.text;
      a["variants"].push_back(std::move(f));
    }
    j["axes"].push_back(std::move(a));
  }
  return j.dump(2);
}

void PromptRegistry::validate() const {
  for (const auto& axis : axes_) {
    if (axis.variants.empty()) {
      throw ConfigError("prompt axis '" + axis.name + "' has no variants");
    }
    if (axis.absent_variant() == nullptr) {
      throw ConfigError("prompt axis '" + axis.name + "' lacks an absent (empty) variant");
    }
    std::vector<std::string> ids;
    for (const auto& v : axis.variants) {
      if (std::find(ids.begin(), ids.end(), v.id) != ids.end()) {
        throw ConfigError("prompt axis '" + axis.name + "' has duplicate variant id '" + v.id +
                          "'");
      }
      ids.push_back(v.id);
    }
  }
  std::vector<std::string> names;
  for (const auto& axis : axes_) {
    if (std::find(names.begin(), names.end(), axis.name) != names.end()) {
      throw ConfigError("duplicate prompt axis '" + axis.name + "'");
    }
    names.push_back(axis.name);
  }
}

const PromptAxis* PromptRegistry::find_axis(std::string_view name) const {
  for (const auto& axis : axes_) {
    if (axis.name == name) return &axis;
  }
  return nullptr;
}

namespace {

const PromptFragment& chosen_fragment(const PromptAxis& axis, const PromptVariantSet& variants) {
  const std::string* id = variants.choice(axis.name);
  if (id == nullptr) {
    throw PromptError("variant set has no choice for axis '" + axis.name + "'");
  }
  const PromptFragment* fragment = axis.find(*id);
  if (fragment == nullptr) {
    throw PromptError("axis '" + axis.name + "' has no variant '" + *id + "'");
  }
  return *fragment;
}

}  // namespace

std::string PromptRegistry::render_system(const PersonaFeatures& persona,
                                          const PromptVariantSet& variants) const {
  for (const auto& [axis, id] : variants.choices()) {
    if (find_axis(axis) == nullptr) {
      throw PromptError("variant set names unknown axis '" + axis + "'");
    }
  }

  std::string text = skeleton_;
  bool persona_content = false;
  std::size_t last_persona_axis = 0;

  std::vector<std::string> parts;
  for (const auto& axis : axes_) {
    if (axis.role != PromptRole::system) continue;
    std::string fragment = chosen_fragment(axis, variants).text;
    if ((axis.name == "demographics" || axis.name == "affect") && !fragment.empty()) {
      persona_content = true;
      last_persona_axis = parts.size();
    }
    parts.push_back(std::move(fragment));
  }
  if (persona_content && !disclaimer_.empty()) {
    parts.insert(parts.begin() + static_cast<std::ptrdiff_t>(last_persona_axis) + 1, disclaimer_);
  }
  for (const auto& part : parts) append_sentence(text, part);

  replace_all(text, "[Gender]", to_string(persona.gender));
  replace_all(text, "[Age]", std::to_string(persona.age));
  replace_all(text, "[Affect]", persona.affect_phrase);
  check_no_placeholders(text, "system prompt");
  return text;
}

std::string PromptRegistry::render_opening(const PersonaFeatures& persona,
                                           const PromptVariantSet& variants) const {
  std::string text = opening_base_;
  for (const auto& axis : axes_) {
    if (axis.role != PromptRole::opening) continue;
    std::string fragment = chosen_fragment(axis, variants).text;
    if (fragment.empty()) continue;
    if (fragment.find("[Topic]") != std::string::npos && trim(persona.topic_phrase).empty()) {
      throw PromptError("topic fragment active but persona '" + persona.speaker_id +
                        "' has no topic phrase");
    }
    append_sentence(text, fragment);
  }
  replace_all(text, "[Topic]", persona.topic_phrase);
  check_no_placeholders(text, "opening prompt");
  return text;
}

RenderedPrompt PromptRegistry::render(const PersonaFeatures& persona,
                                      const PromptVariantSet& variants) const {
  return RenderedPrompt{render_system(persona, variants), render_opening(persona, variants)};
}

}  // namespace parley
