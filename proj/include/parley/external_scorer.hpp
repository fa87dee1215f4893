#pragma once

#include <memory>
#include <string>
#include <vector>

#include "parley/errors.hpp"

namespace parley {

// Hook for style models that live outside this process. The protocol is
// line-oriented JSON: one {"text": ...} per input, one {"score": ...} per
// output, order-preserving.
class ExternalScorer {
 public:
  virtual ~ExternalScorer() = default;
  virtual std::vector<double> score(const std::vector<std::string>& texts) = 0;
};

// Runs a shell command per batch; requests go to its stdin, scores come
// back on its stdout. A response line count that differs from the request
// count is a protocol error.
class SubprocessScorer : public ExternalScorer {
 public:
  explicit SubprocessScorer(std::string command);
  std::vector<double> score(const std::vector<std::string>& texts) override;

 private:
  std::string command_;
};

// POSTs {"text": ...} per input to an HTTP endpoint returning {"score": ...}.
class HttpScorer : public ExternalScorer {
 public:
  explicit HttpScorer(std::string endpoint);
  ~HttpScorer() override;
  std::vector<double> score(const std::vector<std::string>& texts) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace parley
