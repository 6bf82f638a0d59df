#include "mecole/log.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>

namespace mecole::log {

namespace {

Level from_env() {
  const char* v = std::getenv("MECOLE_LOG");
  if (!v) return Level::warn;
  const std::string s(v);
  if (s == "error") return Level::error;
  if (s == "info") return Level::info;
  if (s == "debug") return Level::debug;
  return Level::warn;
}

std::atomic<int>& level_storage() {
  static std::atomic<int> level{static_cast<int>(from_env())};
  return level;
}

const char* tag(Level l) {
  switch (l) {
    case Level::error:
      return "error";
    case Level::warn:
      return "warn";
    case Level::info:
      return "info";
    case Level::debug:
      return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() { return static_cast<Level>(level_storage().load()); }

void set_threshold(Level level) { level_storage().store(static_cast<int>(level)); }

void write(Level level, const std::string& msg) {
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[mecole " << tag(level) << "] " << msg << '\n';
}

}  // namespace mecole::log
