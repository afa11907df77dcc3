#pragma once

#include <string>

namespace jcall {

enum class LogLevel { Debug = 0, Info, Warn, Error, Off };

LogLevel log_threshold();
void set_log_threshold(LogLevel level);

void log_line(LogLevel level, const std::string& msg);

// printf-style convenience wrapper, truncates at 1KB per line
void logf(LogLevel level, const char* fmt, ...) __attribute__((format(printf, 2, 3)));

}  // namespace jcall
