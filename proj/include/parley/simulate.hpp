#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "parley/chat_client.hpp"
#include "parley/corpus.hpp"
#include "parley/features.hpp"
#include "parley/prompts.hpp"

namespace parley {

struct GeneratedConversation {
  std::string conversation_id;
  PersonaFeatures persona_a;
  PersonaFeatures persona_b;
  std::string variant_key;
  std::vector<Turn> turns;  // even indices agent A, odd agent B
  bool truncated = false;
  std::string backend_id;
  std::uint64_t seed = 0;
  std::string generated_at;  // empty for deterministic (mock) runs
};

struct PersonaPair {
  PersonaFeatures a;
  PersonaFeatures b;
  std::string pair_id;  // source human conversation id
};

struct DialogueSet {
  std::vector<GeneratedConversation> conversations;

  // Conversation views for the scoring pipeline; generated turns carry the
  // source human speaker ids so samples pair up by unit id.
  std::vector<Conversation> to_conversations(bool exclude_truncated = true) const;
  std::size_t truncated_count() const;
};

// Two persona-conditioned agents exchange `turns` utterances. Agent A's
// first user message is its rendered opening; afterwards each utterance is
// replayed to the other agent as a user message on top of the full
// alternating history. A backend failure after retries truncates the
// conversation and flags it.
GeneratedConversation run_conversation(const PersonaFeatures& persona_a,
                                       const PersonaFeatures& persona_b,
                                       const PromptVariantSet& variants,
                                       const PromptRegistry& registry, ChatClient& client,
                                       int turns, std::uint64_t seed,
                                       const std::string& conversation_id);

struct BatchOptions {
  int conversations_per_pair = 1;
  int turns = 64;
  std::uint64_t master_seed = 0;
  int workers = 1;
  double min_success_fraction = 1.0;  // below this, run_batch throws BatchError
  bool record_timestamps = false;     // off: outputs are byte-stable
};

// Generates conversations for every (pair, replicate) under a bounded worker
// pool. Conversation seeds derive from (master seed, pair id, replicate), so
// output is byte-identical across runs and worker counts.
DialogueSet run_batch(std::span<const PersonaPair> pairs, const PromptVariantSet& variants,
                      const PromptRegistry& registry, ChatClient& client,
                      const BatchOptions& options);

// Turn lines: {"conversation_id","agent","index","text"}; the manifest
// carries seeds, variant ids, personas and counts.
std::string dialogues_to_jsonl(const DialogueSet& dialogues);
void write_dialogue_set(const DialogueSet& dialogues, const std::filesystem::path& turns_path,
                        const std::filesystem::path& manifest_path);
DialogueSet load_dialogue_set(const std::filesystem::path& turns_path,
                              const std::filesystem::path& manifest_path);

}  // namespace parley
