#pragma once

#include <string_view>

namespace slidemil::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

void set_level(Level level);
Level level();

void error(std::string_view msg);
void warn(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

/// Number of warnings emitted since process start (tests use this to observe
/// warning paths).
unsigned long warning_count();

}  // namespace slidemil::log
