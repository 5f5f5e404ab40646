#pragma once

#include <string_view>

namespace music::util {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();
bool set_log_level(std::string_view name);  // "debug", "info", "warn", "error", "off"

// printf-style, writes to stderr with a level prefix.
void log(LogLevel level, const char* fmt, ...) __attribute__((format(printf, 2, 3)));

#define MUSIC_LOG_DEBUG(...) ::music::util::log(::music::util::LogLevel::Debug, __VA_ARGS__)
#define MUSIC_LOG_INFO(...) ::music::util::log(::music::util::LogLevel::Info, __VA_ARGS__)
#define MUSIC_LOG_WARN(...) ::music::util::log(::music::util::LogLevel::Warn, __VA_ARGS__)
#define MUSIC_LOG_ERROR(...) ::music::util::log(::music::util::LogLevel::Error, __VA_ARGS__)

}  // namespace music::util
