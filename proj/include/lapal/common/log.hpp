#pragma once

#include <atomic>
#include <iostream>
#include <string>

namespace lapal {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kSilent = 4 };

inline std::atomic<LogLevel>& log_threshold() {
  static std::atomic<LogLevel> level{LogLevel::kInfo};
  return level;
}

inline void set_log_level(LogLevel level) { log_threshold().store(level); }

inline void log_message(LogLevel level, const std::string& msg) {
  if (level < log_threshold().load()) return;
  static const char* const kTags[] = {"debug", "info", "warn", "error"};
  std::cerr << "[" << kTags[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void log_debug(const std::string& msg) { log_message(LogLevel::kDebug, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::kInfo, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::kWarn, msg); }

}  // namespace lapal
