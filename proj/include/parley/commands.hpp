#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <ostream>
#include <vector>

#include "parley/chat_client.hpp"
#include "parley/config.hpp"
#include "parley/metrics.hpp"

namespace parley {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntimeError = 1,
  kExitConfigError = 2,
  kExitPartialBatch = 3,
};

// Pass-through decorator that counts backend calls (cache-hit verification).
class CountingChatClient : public ChatClient {
 public:
  explicit CountingChatClient(ChatClient& inner) : inner_(inner) {}

  std::string do_complete(const std::string& system_text, const std::vector<ChatMessage>& history,
                       std::uint64_t seed) override {
    calls_.fetch_add(1);
    return inner_.complete(system_text, history, seed);
  }
  std::string id() const override { return inner_.id(); }
  long calls() const { return calls_.load(); }

 private:
  ChatClient& inner_;
  std::atomic<long> calls_{0};
};

// Mock when configured, HTTP client otherwise.
std::unique_ptr<ChatClient> make_chat_client(const PipelineConfig& config);

// Artifact locations under the configured output directory.
std::filesystem::path corpus_artifact(const PipelineConfig& config);
std::filesystem::path persona_artifact(const PipelineConfig& config);

std::string render_report_table(const MetricReport& report,
                                std::optional<Level> level = std::nullopt);

int cmd_ingest(const PipelineConfig& config, std::ostream& log);
int cmd_extract(const PipelineConfig& config, std::ostream& log);
int cmd_simulate(const PipelineConfig& config, const std::filesystem::path& variants_file,
                 std::ostream& log);
int cmd_evaluate(const PipelineConfig& config, const std::filesystem::path& corpus_path,
                 const std::filesystem::path& dialogues_path,
                 const std::filesystem::path& manifest_path, std::ostream& log);
int cmd_optimize(const PipelineConfig& config, bool resume, std::ostream& log);
int cmd_report(const std::vector<std::filesystem::path>& report_files,
               std::optional<Level> level, std::ostream& out);

}  // namespace parley
