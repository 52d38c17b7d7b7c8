#pragma once

#include <string_view>
#include <utility>

#include <fmt/format.h>

namespace chns::log {

enum class Level { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

void set_level(Level l);
Level level();
/// Writes "[phase] message" to stderr when `l` is enabled.
void write(Level l, std::string_view phase, std::string_view msg);

template <typename... Args>
void info(std::string_view phase, fmt::format_string<Args...> f, Args&&... args) {
  if (level() >= Level::Info) write(Level::Info, phase, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void warn(std::string_view phase, fmt::format_string<Args...> f, Args&&... args) {
  if (level() >= Level::Warn) write(Level::Warn, phase, fmt::format(f, std::forward<Args>(args)...));
}
template <typename... Args>
void debug(std::string_view phase, fmt::format_string<Args...> f, Args&&... args) {
  if (level() >= Level::Debug) write(Level::Debug, phase, fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace chns::log
