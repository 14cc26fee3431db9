#include "diffeo/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace diffeo {
namespace {

LogLevel parse_level() {
  const char* env = std::getenv("DIFFEO_LOG");
  if (env == nullptr) return LogLevel::kError;
  const std::string value(env);
  if (value == "debug") return LogLevel::kDebug;
  if (value == "info") return LogLevel::kInfo;
  return LogLevel::kError;
}

void emit(const char* tag, const std::string& message) {
  static std::mutex mutex;
  const std::lock_guard<std::mutex> lock(mutex);
  std::cerr << tag << message << '\n';
}

}  // namespace

LogLevel log_level() {
  static const LogLevel level = parse_level();
  return level;
}

void log_error(const std::string& message) { emit("[diffeo] error: ", message); }

void log_info(const std::string& message) {
  if (static_cast<int>(log_level()) >= static_cast<int>(LogLevel::kInfo)) {
    emit("[diffeo] ", message);
  }
}

void log_debug(const std::string& message) {
  if (static_cast<int>(log_level()) >= static_cast<int>(LogLevel::kDebug)) {
    emit("[diffeo] debug: ", message);
  }
}

}  // namespace diffeo
