#pragma once

#include <string>

namespace invit::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Process-wide verbosity. Initialised from INVIT_LOG_LEVEL
/// (error|warn|info|debug) on first use; defaults to info.
Level level();
void set_level(Level lv);

void write(Level lv, const std::string& msg);

void error(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void warn(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void info(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void debug(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

}  // namespace invit::log
