#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "parley/errors.hpp"
#include "parley/features.hpp"

namespace parley {

enum class PromptRole { system, opening };

struct PromptFragment {
  std::string id;
  std::string text;  // empty text marks the axis's "absent" variant

  bool absent() const { return text.empty(); }
};

struct PromptAxis {
  std::string name;
  PromptRole role = PromptRole::system;
  std::vector<PromptFragment> variants;

  const PromptFragment* find(std::string_view variant_id) const;
  const PromptFragment* absent_variant() const;
};

// One choice per axis. The key() form ("axis=id;...", axes sorted by name)
// identifies a variant set in traces and resume state.
class PromptVariantSet {
 public:
  PromptVariantSet() = default;

  void choose(const std::string& axis, const std::string& variant_id);
  const std::string* choice(const std::string& axis) const;
  const std::map<std::string, std::string>& choices() const { return choices_; }
  std::string key() const;

  static PromptVariantSet baseline(const std::vector<PromptAxis>& axes);

 private:
  std::map<std::string, std::string> choices_;
};

struct RenderedPrompt {
  std::string system_text;
  std::string opening_user_text;
};

// Holds the prompt axes plus the fixed sentences shared by every variant
// set: the opening instruction, and the don't-state-your-persona disclaimer
// that accompanies any active demographics/affect fragment.
class PromptRegistry {
 public:
  static PromptRegistry defaults();
  static PromptRegistry from_json_text(const std::string& text);
  static PromptRegistry from_json_file(const std::filesystem::path& path);

  std::string to_json() const;

  const std::vector<PromptAxis>& axes() const { return axes_; }
  const PromptAxis* find_axis(std::string_view name) const;

  std::string render_system(const PersonaFeatures& persona, const PromptVariantSet& variants) const;
  std::string render_opening(const PersonaFeatures& persona, const PromptVariantSet& variants) const;
  RenderedPrompt render(const PersonaFeatures& persona, const PromptVariantSet& variants) const;

 private:
  void validate() const;

  std::vector<PromptAxis> axes_;
  std::string skeleton_;  // leading fixed system text; empty by default
  std::string disclaimer_;
  std::string opening_base_;
};

}  // namespace parley
