#pragma once

#include <iostream>
#include <sstream>
#include <string>

namespace mecole::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Reads MECOLE_LOG (error|warn|info|debug) once; defaults to warn.
Level threshold();
void set_threshold(Level level);

void write(Level level, const std::string& msg);

template <typename... Args>
void emit(Level level, Args&&... args) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::ostringstream os;
  (os << ... << args);
  write(level, os.str());
}

template <typename... Args>
void error(Args&&... a) { emit(Level::error, std::forward<Args>(a)...); }
template <typename... Args>
void warn(Args&&... a) { emit(Level::warn, std::forward<Args>(a)...); }
template <typename... Args>
void info(Args&&... a) { emit(Level::info, std::forward<Args>(a)...); }
template <typename... Args>
void debug(Args&&... a) { emit(Level::debug, std::forward<Args>(a)...); }

}  // namespace mecole::log
