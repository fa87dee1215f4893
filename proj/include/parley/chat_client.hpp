#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "parley/errors.hpp"

namespace parley {

struct ChatMessage {
  enum class Role { user, assistant };
  Role role = Role::user;
  std::string content;
};

// Throws BackendError unless the history starts with a user message and
// strictly alternates roles.
void validate_history(std::span<const ChatMessage> history);

// A chat-completion backend. `seed` is a decoding hint that deterministic
// backends fold into their generation; HTTP backends ignore it.
class ChatClient {
 public:
  virtual ~ChatClient() = default;

  std::string complete(const std::string& system_text, const std::vector<ChatMessage>& history,
                       std::uint64_t seed = 0) {
    return do_complete(system_text, history, seed);
  }
  virtual std::string id() const = 0;

 private:
  virtual std::string do_complete(const std::string& system_text,
                                  const std::vector<ChatMessage>& history, std::uint64_t seed) = 0;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{250};
  std::chrono::milliseconds max_delay{8000};
  double jitter = 0.25;  // fraction of the delay randomized away
};

struct RateLimit {
  double requests_per_second = 0.0;  // 0 = unlimited
  int burst = 1;
  int max_concurrency = 4;
};

struct BackendConfig {
  std::string endpoint;  // e.g. http://host:port/v1/chat/completions
  std::string model;
  double temperature = 1.0;
  int max_tokens = 256;
  std::string api_key_env;  // name of the environment variable holding the key
  RetryPolicy retry;
  RateLimit rate_limit;
};

// Chat-completion client over HTTP JSON: POST {model, messages, temperature,
// max_tokens}, answer read from choices[0].message.content. Retries on 408,
// 429, 5xx and transport errors with jittered exponential backoff; requests
// pass through a token-bucket rate limiter and a concurrency cap. Safe for
// concurrent use.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(BackendConfig config);
  ~HttpChatClient() override;

  std::string do_complete(const std::string& system_text, const std::vector<ChatMessage>& history,
                       std::uint64_t seed) override;
  std::string id() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace parley
