#include "invit/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstdarg>
#include <cstring>
#include <mutex>

namespace invit::log {

namespace {

std::atomic<int> g_level{-1};
std::mutex g_mu;

Level from_env() {
  const char* v = std::getenv("INVIT_LOG_LEVEL");
  if (v == nullptr) return Level::kInfo;
  if (std::strcmp(v, "error") == 0) return Level::kError;
  if (std::strcmp(v, "warn") == 0) return Level::kWarn;
  if (std::strcmp(v, "debug") == 0) return Level::kDebug;
  return Level::kInfo;
}

const char* tag(Level lv) {
  switch (lv) {
    case Level::kError: return "error";
    case Level::kWarn: return "warn";
    case Level::kInfo: return "info";
    case Level::kDebug: return "debug";
  }
  return "?";
}

}  // namespace

Level level() {
  int lv = g_level.load(std::memory_order_relaxed);
  if (lv < 0) {
    lv = static_cast<int>(from_env());
    g_level.store(lv, std::memory_order_relaxed);
  }
  return static_cast<Level>(lv);
}

void set_level(Level lv) { g_level.store(static_cast<int>(lv), std::memory_order_relaxed); }

void write(Level lv, const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_mu);
  std::fprintf(stderr, "[%s] %s\n", tag(lv), msg.c_str());
}

namespace {

void vwrite(Level lv, const char* fmt, va_list ap) {
  char buf[1024];
  std::vsnprintf(buf, sizeof(buf), fmt, ap);
  write(lv, buf);
}

}  // namespace

void error(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  vwrite(Level::kError, fmt, ap);
  va_end(ap);
}

void warn(const char* fmt, ...) {
  if (level() < Level::kWarn) return;
  va_list ap;
  va_start(ap, fmt);
  vwrite(Level::kWarn, fmt, ap);
  va_end(ap);
}

void info(const char* fmt, ...) {
  if (level() < Level::kInfo) return;
  va_list ap;
  va_start(ap, fmt);
  vwrite(Level::kInfo, fmt, ap);
  va_end(ap);
}

void debug(const char* fmt, ...) {
  if (level() < Level::kDebug) return;
  va_list ap;
  va_start(ap, fmt);
  vwrite(Level::kDebug, fmt, ap);
  va_end(ap);
}

}  // namespace invit::log
