#include "jcall/util/log.hpp"

#include <cstdarg>
#include <cstdio>

namespace jcall {

namespace {
LogLevel g_threshold = LogLevel::Warn;

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "DBG";
    case LogLevel::Info: return "INF";
    case LogLevel::Warn: return "WRN";
    case LogLevel::Error: return "ERR";
    case LogLevel::Off: return "OFF";
  }
  return "?";
}
}  // namespace

LogLevel log_threshold() { return g_threshold; }

void set_log_threshold(LogLevel level) { g_threshold = level; }

void log_line(LogLevel level, const std::string& msg) {
  if (level < g_threshold) return;
  std::fprintf(stderr, "[%s] %s\n", level_tag(level), msg.c_str());
}

void logf(LogLevel level, const char* fmt, ...) {
  if (level < g_threshold) return;
  char buf[1024];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  std::fprintf(stderr, "[%s] %s\n", level_tag(level), buf);
}

}  // namespace jcall
