#include "parley/chat_client.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace parley {

void validate_history(std::span<const ChatMessage> history) {
  if (history.empty()) {
    throw BackendError("chat history is empty; the first message must be a user message");
  }
  if (history.front().role != ChatMessage::Role::user) {
    throw BackendError("chat history must start with a user message");
  }
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].role == history[i - 1].role) {
      throw BackendError("chat history roles must strictly alternate (violation at index " +
                         std::to_string(i) + ")");
    }
  }
}

namespace {

struct ParsedEndpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("backend endpoint must include a scheme: '" + endpoint + "'");
  }
  const std::size_t path_start = endpoint.find('/', scheme + 3);
  ParsedEndpoint parsed;
  if (path_start == std::string::npos) {
    parsed.base = endpoint;
    parsed.path = "/";
  } else {
    parsed.base = endpoint.substr(0, path_start);
    parsed.path = endpoint.substr(path_start);
  }
  return parsed;
}

bool retryable_status(int status) {
  return status == 408 || status == 429 || (status >= 500 && status < 600);
}

// Counting semaphore with a runtime limit.
class ConcurrencyGate {
 public:
  explicit ConcurrencyGate(int limit) : limit_(std::max(1, limit)) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --active_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int limit_;
  int active_ = 0;
};

class TokenBucket {
 public:
  TokenBucket(double rate, int burst)
      : rate_(rate), capacity_(std::max(1, burst)), tokens_(static_cast<double>(capacity_)),
        last_(std::chrono::steady_clock::now()) {}

  void acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock<std::mutex> lock(mutex_);
    for (;;) {
      refill();
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const double deficit = 1.0 - tokens_;
      const auto wait = std::chrono::duration<double>(deficit / rate_);
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
    }
  }

 private:
  void refill() {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(static_cast<double>(capacity_), tokens_ + elapsed * rate_);
  }

  std::mutex mutex_;
  double rate_;
  int capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

std::string excerpt(const std::string& body) {
  if (body.size() <= 200) return body;
  return body.substr(0, 200) + "...";
}

}  // namespace

struct HttpChatClient::Impl {
  BackendConfig config;
  ParsedEndpoint endpoint;
  std::string api_key;
  TokenBucket bucket;
  ConcurrencyGate gate;

  Impl(BackendConfig cfg)
      : config(std::move(cfg)),
        endpoint(parse_endpoint(config.endpoint)),
        bucket(config.rate_limit.requests_per_second, config.rate_limit.burst),
        gate(config.rate_limit.max_concurrency) {
    if (!config.api_key_env.empty()) {
      const char* value = std::getenv(config.api_key_env.c_str());
      if (value == nullptr) {
        throw BackendError("credential environment variable not set: " + config.api_key_env);
      }
      api_key = value;
    }
  }
};

HttpChatClient::HttpChatClient(BackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpChatClient::~HttpChatClient() = default;

std::string HttpChatClient::id() const {
  return impl_->config.model.empty() ? impl_->config.endpoint
                                     : impl_->config.endpoint + "#" + impl_->config.model;
}

std::string HttpChatClient::do_complete(const std::string& system_text,
                                     const std::vector<ChatMessage>& history, std::uint64_t) {
  validate_history(history);

  nlohmann::json body;
  body["model"] = impl_->config.model;
  body["messages"] = nlohmann::json::array();
  if (!system_text.empty()) {
    body["messages"].push_back({{"role", "system"}, {"content", system_text}});
  }
  for (const ChatMessage& message : history) {
    body["messages"].push_back(
        {{"role", message.role == ChatMessage::Role::user ? "user" : "assistant"},
         {"content", message.content}});
  }
  body["temperature"] = impl_->config.temperature;
  body["max_tokens"] = impl_->config.max_tokens;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!impl_->api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + impl_->api_key);
  }

  const RetryPolicy& retry = impl_->config.retry;
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, retry.max_attempts); ++attempt) {
    impl_->bucket.acquire();
    impl_->gate.acquire();
    httplib::Client http(impl_->endpoint.base);
    http.set_read_timeout(120, 0);
    auto result = http.Post(impl_->endpoint.path, headers, payload, "application/json");
    impl_->gate.release();

    bool retry_this = false;
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      retry_this = true;
    } else if (result->status != 200) {
      last_error = "HTTP " + std::to_string(result->status) + ": " + excerpt(result->body);
      retry_this = retryable_status(result->status);
      if (!retry_this) {
        throw BackendError("chat completion failed (" + last_error + ")");
      }
    } else {
      try {
        auto json = nlohmann::json::parse(result->body);
        return json.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw BackendError("unexpected chat completion response shape: " + std::string(e.what()) +
                           "; body: " + excerpt(result->body));
      }
    }

    if (retry_this && attempt < retry.max_attempts) {
      auto delay = retry.base_delay * (1LL << (attempt - 1));
      delay = std::min<std::chrono::milliseconds>(delay, retry.max_delay);
      if (retry.jitter > 0.0) {
        thread_local std::mt19937_64 rng{std::random_device{}()};
        std::uniform_real_distribution<double> u(0.0, retry.jitter);
        delay = std::chrono::milliseconds(
            static_cast<long long>(static_cast<double>(delay.count()) * (1.0 - u(rng))));
      }
      std::this_thread::sleep_for(delay);
    }
  }
  throw BackendError("chat completion failed after " + std::to_string(retry.max_attempts) +
                     " attempts; last error: " + last_error);
}

}  // namespace parley
