#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace parley {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

class LexiconError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class PromptError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

class ScorerError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when a generation batch falls below its configured success fraction.
class BatchError : public Error {
 public:
  BatchError(const std::string& message, std::size_t completed, std::size_t failed)
      : Error(message), completed_(completed), failed_(failed) {}

  std::size_t completed() const { return completed_; }
  std::size_t failed() const { return failed_; }

 private:
  std::size_t completed_;
  std::size_t failed_;
};

}  // namespace parley
