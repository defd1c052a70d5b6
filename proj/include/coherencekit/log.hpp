#pragma once

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace coherencekit::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Verbosity comes from COHERENCEKIT_LOG (error|warn|info|debug), default warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("COHERENCEKIT_LOG");
    if (env == nullptr) return Level::warn;
    std::string_view v(env);
    if (v == "error") return Level::error;
    if (v == "info") return Level::info;
    if (v == "debug") return Level::debug;
    return Level::warn;
  }();
  return level;
}

template <typename... Args>
void write(Level level, std::string_view tag, const Args&... args) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::cerr << "[coherencekit " << tag << "] ";
  (std::cerr << ... << args);
  std::cerr << '\n';
}

template <typename... Args>
void warn(const Args&... args) { write(Level::warn, "warn", args...); }
template <typename... Args>
void info(const Args&... args) { write(Level::info, "info", args...); }
template <typename... Args>
void debug(const Args&... args) { write(Level::debug, "debug", args...); }

}  // namespace coherencekit::log
