#include "music/log.hpp"

#include <atomic>
#include <cstdarg>
#include <cstdio>

namespace music::util {

namespace {
std::atomic<LogLevel> g_level{LogLevel::Info};

const char* prefix(LogLevel l) {
  switch (l) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
    default: return "?";
  }
}
}  // namespace

void set_log_level(LogLevel level) { g_level.store(level); }
LogLevel log_level() { return g_level.load(); }

bool set_log_level(std::string_view name) {
  if (name == "debug") set_log_level(LogLevel::Debug);
  else if (name == "info") set_log_level(LogLevel::Info);
  else if (name == "warn") set_log_level(LogLevel::Warn);
  else if (name == "error") set_log_level(LogLevel::Error);
  else if (name == "off") set_log_level(LogLevel::Off);
  else return false;
  return true;
}

void log(LogLevel level, const char* fmt, ...) {
  if (level < g_level.load()) return;
  std::fprintf(stderr, "[%s] ", prefix(level));
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stderr, fmt, ap);
  va_end(ap);
  std::fputc('\n', stderr);
}

}  // namespace music::util
