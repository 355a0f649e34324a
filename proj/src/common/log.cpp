#include "slidemil/common/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace slidemil::log {

namespace {

std::atomic<Level> g_level{Level::warn};
std::atomic<unsigned long> g_warnings{0};
std::mutex g_mutex;

void emit(Level at, const char* prefix, std::string_view msg) {
  if (static_cast<int>(at) > static_cast<int>(g_level.load())) return;
  std::lock_guard lock(g_mutex);
  std::cerr << prefix << msg << '\n';
}

}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void error(std::string_view msg) { emit(Level::error, "error: ", msg); }
void warn(std::string_view msg) {
  ++g_warnings;
  emit(Level::warn, "warning: ", msg);
}
void info(std::string_view msg) { emit(Level::info, "", msg); }
void debug(std::string_view msg) { emit(Level::debug, "debug: ", msg); }

unsigned long warning_count() { return g_warnings; }

}  // namespace slidemil::log
