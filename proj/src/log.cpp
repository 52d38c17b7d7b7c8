#include "chns/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace chns::log {
namespace {
std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;
}  // namespace

void set_level(Level l) { g_level.store(l); }
Level level() { return g_level.load(); }

void write(Level l, std::string_view phase, std::string_view msg) {
  const char* tag = l == Level::Warn ? " warning: " : " ";
  std::lock_guard lock(g_mutex);
  fmt::print(stderr, "[{}]{}{}\n", phase, tag, msg);
}

}  // namespace chns::log
