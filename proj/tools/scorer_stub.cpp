// Line-oriented external-scorer stub: reads {"text": ...} lines on stdin and
// answers {"score": ...} per line. Used by the test suites to exercise the
// scorer protocol without a real style model.
//
//   --score <x>    constant score to emit (default 0.5)
//   --drop-last    swallow the final response (protocol-error simulation)

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

int main(int argc, char** argv) {
  double score = 0.5;
  bool drop_last = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--score" && i + 1 < argc) {
      score = std::strtod(argv[++i], nullptr);
    } else if (arg == "--drop-last") {
      drop_last = true;
    }
  }

  std::vector<std::string> responses;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    try {
      auto row = nlohmann::json::parse(line);
      if (!row.contains("text")) return 1;
    } catch (const nlohmann::json::exception&) {
      return 1;
    }
    nlohmann::json out;
    out["score"] = score;
    responses.push_back(out.dump());
  }
  if (drop_last && !responses.empty()) responses.pop_back();
  for (const auto& response : responses) std::cout << response << '\n';
  return 0;
}
