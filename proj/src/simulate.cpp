#include "parley/simulate.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "parley/util.hpp"

namespace parley {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json persona_to_json(const PersonaFeatures& p) {
  ordered_json j;
  j["speaker_id"] = p.speaker_id;
  j["age"] = p.age;
  j["gender"] = to_string(p.gender);
  j["affect_phrase"] = p.affect_phrase;
  j["topic_phrase"] = p.topic_phrase;
  j["source_conversation_id"] = p.source_conversation_id;
  return j;
}

PersonaFeatures persona_from_json(const ordered_json& j) {
  PersonaFeatures p;
  p.speaker_id = j.at("speaker_id").get<std::string>();
  p.age = j.at("age").get<int>();
  auto sex = sex_from_string(j.at("gender").get<std::string>());
  if (!sex) throw CorpusError("invalid gender in manifest");
  p.gender = *sex;
  p.affect_phrase = j.at("affect_phrase").get<std::string>();
  p.topic_phrase = j.at("topic_phrase").get<std::string>();
  p.source_conversation_id = j.at("source_conversation_id").get<std::string>();
  return p;
}

}  // namespace

std::vector<Conversation> DialogueSet::to_conversations(bool exclude_truncated) const {
  std::vector<Conversation> out;
  for (const auto& gc : conversations) {
    if (exclude_truncated && gc.truncated) continue;
    Conversation conv;
    conv.conversation_id = gc.conversation_id;
    conv.participants = {gc.persona_a.speaker_id, gc.persona_b.speaker_id};
    conv.turns = gc.turns;
    out.push_back(std::move(conv));
  }
  return out;
}

std::size_t DialogueSet::truncated_count() const {
  std::size_t n = 0;
  for (const auto& gc : conversations) {
    if (gc.truncated) ++n;
  }
  return n;
}

GeneratedConversation run_conversation(const PersonaFeatures& persona_a,
                                       const PersonaFeatures& persona_b,
                                       const PromptVariantSet& variants,
                                       const PromptRegistry& registry, ChatClient& client,
                                       int turns, std::uint64_t seed,
                                       const std::string& conversation_id) {
  if (turns < 2 || turns % 2 != 0) {
    throw std::invalid_argument("run_conversation: turns must be even and >= 2, got " +
                                std::to_string(turns));
  }

  const RenderedPrompt prompt_a = registry.render(persona_a, variants);
  const RenderedPrompt prompt_b = registry.render(persona_b, variants);

  GeneratedConversation gc;
  gc.conversation_id = conversation_id;
  gc.persona_a = persona_a;
  gc.persona_b = persona_b;
  gc.variant_key = variants.key();
  gc.backend_id = client.id();
  gc.seed = seed;

  std::vector<ChatMessage> history_a = {{ChatMessage::Role::user, prompt_a.opening_user_text}};
  std::vector<ChatMessage> history_b;

  for (int t = 0; t < turns; ++t) {
    const bool is_a = (t % 2 == 0);
    std::vector<ChatMessage>& own = is_a ? history_a : history_b;
    std::vector<ChatMessage>& other = is_a ? history_b : history_a;
    const std::string& system_text = is_a ? prompt_a.system_text : prompt_b.system_text;
    const PersonaFeatures& persona = is_a ? persona_a : persona_b;

    validate_history(own);
    std::string utterance;
    try {
      utterance = client.complete(system_text, own, seed);
    } catch (const BackendError&) {
      gc.truncated = true;
      break;
    }
    own.push_back({ChatMessage::Role::assistant, utterance});
    other.push_back({ChatMessage::Role::user, utterance});
    gc.turns.push_back(Turn{persona.speaker_id, t, std::move(utterance)});
  }
  return gc;
}

DialogueSet run_batch(std::span<const PersonaPair> pairs, const PromptVariantSet& variants,
                      const PromptRegistry& registry, ChatClient& client,
                      const BatchOptions& options) {
  if (pairs.empty()) {
    throw std::invalid_argument("run_batch: no persona pairs");
  }
  if (options.conversations_per_pair < 0) {
    throw std::invalid_argument("run_batch: negative replicate count");
  }

  struct Task {
    const PersonaPair* pair;
    int replicate;
    std::uint64_t seed;
    std::string conversation_id;
  };
  std::vector<Task> tasks;
  for (const PersonaPair& pair : pairs) {
    for (int r = 0; r < options.conversations_per_pair; ++r) {
      Task task;
      task.pair = &pair;
      task.replicate = r;
      task.seed = mix_seed(mix_seed(options.master_seed, fnv1a64(pair.pair_id)),
                           static_cast<std::uint64_t>(r));
      task.conversation_id = pair.pair_id + "#" + std::to_string(r);
      tasks.push_back(std::move(task));
    }
  }

  DialogueSet set;
  set.conversations.resize(tasks.size());
  parallel_for(tasks.size(), options.workers, [&](std::size_t i) {
    const Task& task = tasks[i];
    set.conversations[i] = run_conversation(task.pair->a, task.pair->b, variants, registry, client,
                                            options.turns, task.seed, task.conversation_id);
    if (options.record_timestamps) set.conversations[i].generated_at = utc_timestamp();
  });

  const std::size_t failed = set.truncated_count();
  const std::size_t total = set.conversations.size();
  if (total > 0) {
    const double success =
        static_cast<double>(total - failed) / static_cast<double>(total);
    if (success < options.min_success_fraction) {
      throw BatchError("run_batch: only " + std::to_string(total - failed) + "/" +
                           std::to_string(total) + " conversations completed (min success " +
                           std::to_string(options.min_success_fraction) + ")",
                       total - failed, failed);
    }
  }
  return set;
}

std::string dialogues_to_jsonl(const DialogueSet& dialogues) {
  std::string out;
  for (const auto& gc : dialogues.conversations) {
    for (const auto& turn : gc.turns) {
      ordered_json row;
      row["conversation_id"] = gc.conversation_id;
      row["agent"] = (turn.index % 2 == 0) ? "A" : "B";
      row["index"] = turn.index;
      row["text"] = turn.text;
      out += row.dump();
      out += '\n';
    }
  }
  return out;
}

void write_dialogue_set(const DialogueSet& dialogues, const std::filesystem::path& turns_path,
                        const std::filesystem::path& manifest_path) {
  write_file(turns_path, dialogues_to_jsonl(dialogues));

  ordered_json manifest;
  manifest["counts"]["conversations"] = dialogues.conversations.size();
  manifest["counts"]["truncated"] = dialogues.truncated_count();
  manifest["conversations"] = ordered_json::array();
  for (const auto& gc : dialogues.conversations) {
    ordered_json c;
    c["conversation_id"] = gc.conversation_id;
    c["variant_key"] = gc.variant_key;
    c["backend"] = gc.backend_id;
    c["seed"] = gc.seed;
    c["truncated"] = gc.truncated;
    if (!gc.generated_at.empty()) c["generated_at"] = gc.generated_at;
    c["persona_a"] = persona_to_json(gc.persona_a);
    c["persona_b"] = persona_to_json(gc.persona_b);
    manifest["conversations"].push_back(std::move(c));
  }
  write_file(manifest_path, manifest.dump(2) + "\n");
}

DialogueSet load_dialogue_set(const std::filesystem::path& turns_path,
                              const std::filesystem::path& manifest_path) {
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError(manifest_path.string() + ": malformed manifest: " + e.what());
  }

  DialogueSet set;
  std::map<std::string, std::size_t> slot;
  for (const auto& c : manifest.at("conversations")) {
    GeneratedConversation gc;
    gc.conversation_id = c.at("conversation_id").get<std::string>();
    gc.variant_key = c.value("variant_key", "");
    gc.backend_id = c.value("backend", "");
    gc.seed = c.value("seed", std::uint64_t{0});
    gc.truncated = c.value("truncated", false);
    gc.generated_at = c.value("generated_at", "");
    gc.persona_a = persona_from_json(c.at("persona_a"));
    gc.persona_b = persona_from_json(c.at("persona_b"));
    slot[gc.conversation_id] = set.conversations.size();
    set.conversations.push_back(std::move(gc));
  }

  std::ifstream in(turns_path, std::ios::binary);
  if (!in) {
    throw CorpusError("cannot open dialogue file: " + turns_path.string());
  }
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
      throw CorpusError(turns_path.string() + ":" + std::to_string(line_no) +
                        ": malformed JSON: " + e.what());
    }
    const std::string conv_id = row.at("conversation_id").get<std::string>();
    auto it = slot.find(conv_id);
    if (it == slot.end()) {
      throw CorpusError(turns_path.string() + ":" + std::to_string(line_no) +
                        ": conversation '" + conv_id + "' missing from manifest");
    }
    GeneratedConversation& gc = set.conversations[it->second];
    Turn turn;
    turn.index = row.at("index").get<int>();
    turn.text = row.at("text").get<std::string>();
    const std::string agent = row.at("agent").get<std::string>();
    turn.speaker_id =
        agent == "A" ? gc.persona_a.speaker_id : gc.persona_b.speaker_id;
    gc.turns.push_back(std::move(turn));
  }
  return set;
}

}  // namespace parley
