#include "parley/external_scorer.hpp"

#include <csignal>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "parley/util.hpp"

namespace parley {
namespace {

double parse_score_line(const std::string& line, std::size_t index) {
  nlohmann::json row;
  try {
    row = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ScorerError("malformed scorer response at line " + std::to_string(index + 1) + ": " +
                      e.what());
  }
  if (!row.contains("score") || !row["score"].is_number()) {
    throw ScorerError("scorer response line " + std::to_string(index + 1) +
                      " has no numeric 'score' field");
  }
  return row["score"].get<double>();
}

}  // namespace

SubprocessScorer::SubprocessScorer(std::string command) : command_(std::move(command)) {}

std::vector<double> SubprocessScorer::score(const std::vector<std::string>& texts) {
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0) {
    throw ScorerError(std::string("pipe failed: ") + std::strerror(errno));
  }

  const pid_t pid = fork();
  if (pid < 0) {
    throw ScorerError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  close(to_child[0]);
  close(from_child[1]);

  signal(SIGPIPE, SIG_IGN);  // a dead child must surface as a count mismatch, not kill us

  // Writer runs on its own thread so a full pipe cannot deadlock the read;
  // closing the child's stdin is what lets it finish and flush.
  std::thread writer([&] {
    for (const std::string& text : texts) {
      nlohmann::json row;
      row["text"] = text;
      std::string line = row.dump();
      line += '\n';
      std::size_t off = 0;
      while (off < line.size()) {
        const ssize_t n = write(to_child[1], line.data() + off, line.size() - off);
        if (n <= 0) {
          close(to_child[1]);
          return;  // child closed its stdin; reader reports the shortfall
        }
        off += static_cast<std::size_t>(n);
      }
    }
    close(to_child[1]);
  });

  std::string output;
  char buf[4096];
  for (;;) {
    const ssize_t n = read(from_child[0], buf, sizeof(buf));
    if (n <= 0) break;
    output.append(buf, static_cast<std::size_t>(n));
  }
  writer.join();
  close(from_child[0]);

  int status = 0;
  waitpid(pid, &status, 0);

  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < output.size()) {
    std::size_t end = output.find('\n', start);
    if (end == std::string::npos) end = output.size();
    std::string line = output.substr(start, end - start);
    if (!trim(line).empty()) lines.push_back(std::move(line));
    start = end + 1;
  }

  if (WIFEXITED(status) && WEXITSTATUS(status) == 127) {
    throw ScorerError("scorer command not runnable: '" + command_ + "'");
  }
  if (lines.size() != texts.size()) {
    throw ScorerError("scorer protocol error: sent " + std::to_string(texts.size()) +
                      " texts, received " + std::to_string(lines.size()) + " scores");
  }
  std::vector<double> scores;
  scores.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    scores.push_back(parse_score_line(lines[i], i));
  }
  return scores;
}

struct HttpScorer::Impl {
  std::string base;
  std::string path;
};

HttpScorer::HttpScorer(std::string endpoint) : impl_(std::make_unique<Impl>()) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw ScorerError("scorer endpoint must include a scheme: '" + endpoint + "'");
  }
  const std::size_t path_start = endpoint.find('/', scheme + 3);
  if (path_start == std::string::npos) {
    impl_->base = endpoint;
    impl_->path = "/";
  } else {
    impl_->base = endpoint.substr(0, path_start);
    impl_->path = endpoint.substr(path_start);
  }
}

HttpScorer::~HttpScorer() = default;

std::vector<double> HttpScorer::score(const std::vector<std::string>& texts) {
  httplib::Client http(impl_->base);
  std::vector<double> scores;
  scores.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    nlohmann::json row;
    row["text"] = texts[i];
    auto result = http.Post(impl_->path, row.dump(), "application/json");
    if (!result) {
      throw ScorerError("scorer unreachable: " + httplib::to_string(result.error()));
    }
    if (result->status != 200) {
      throw ScorerError("scorer returned HTTP " + std::to_string(result->status));
    }
    scores.push_back(parse_score_line(result->body, i));
  }
  return scores;
}

}  // namespace parley
