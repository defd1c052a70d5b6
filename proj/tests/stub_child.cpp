// Line-protocol stub used by the subprocess backend tests.
//
// Requests are answered with toy::probs_for, in reverse arrival order within
// each read, so rid matching is exercised. Flags:
//   --record FILE   append every request line to FILE
//   --error-rid N   answer rid N with {"rid":N,"error":...}
//   --garbage       answer the first request with a non-JSON line
//   --exit-after N  exit after reading N requests without answering them
//   --bad-sum       scale every distribution by 0.8

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "toy_model.hpp"

int main(int argc, char** argv) {
  std::string record;
  std::optional<long> error_rid;
  std::optional<long> exit_after;
  bool garbage = false;
  bool bad_sum = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--record" && i + 1 < argc) record = argv[++i];
    else if (a == "--error-rid" && i + 1 < argc) error_rid = std::atol(argv[++i]);
    else if (a == "--exit-after" && i + 1 < argc) exit_after = std::atol(argv[++i]);
    else if (a == "--garbage") garbage = true;
    else if (a == "--bad-sum") bad_sum = true;
  }

  std::ofstream rec;
  if (!record.empty()) rec.open(record, std::ios::app);

  std::vector<nlohmann::json> pending;
  long seen = 0;
  auto flush = [&] {
    for (auto it = pending.rbegin(); it != pending.rend(); ++it) {
      const long rid = (*it)["rid"].get<long>();
      nlohmann::ordered_json out;
      out["rid"] = rid;
      if (garbage) {
        std::cout << "not json at all\n";
        garbage = false;
        continue;
      }
      if (error_rid && *error_rid == rid) {
        out["error"] = "stub refused";
      } else {
        auto p = toy::probs_for(*it);
        if (bad_sum) {
          for (double& x : p) x *= 0.8;
        }
        out["probs"] = p;
      }
      std::cout << out.dump() << '\n';
    }
    std::cout.flush();
    pending.clear();
  };

  // Every complete line of a read() chunk is answered together, last first.
  std::string buffer;
  char chunk[65536];
  while (true) {
    const ssize_t got = ::read(STDIN_FILENO, chunk, sizeof chunk);
    if (got <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(got));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (line.empty()) continue;
      if (rec.is_open()) rec << line << '\n' << std::flush;
      ++seen;
      if (exit_after && seen >= *exit_after) return 3;
      pending.push_back(nlohmann::json::parse(line));
    }
    flush();
  }
  flush();
  return 0;
}
