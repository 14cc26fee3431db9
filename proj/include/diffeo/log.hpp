#pragma once

#include <string>

namespace diffeo {

enum class LogLevel : int { kError = 0, kInfo = 1, kDebug = 2 };

// Level comes from the DIFFEO_LOG environment variable (error|info|debug),
// read once per process. Unset means error.
LogLevel log_level();

void log_error(const std::string& message);
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace diffeo
