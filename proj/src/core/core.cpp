#include "seedselect/core/error.hpp"
#include "seedselect/core/hash.hpp"
#include "seedselect/core/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <sstream>

namespace seedselect {

std::string shape_string(const std::vector<long>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace log {
namespace {
std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;
}  // namespace

void set_level(Level l) { g_level = l; }
Level level() { return g_level; }

void write(Level l, std::string_view message) {
  if (l < g_level.load()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(g_mutex);
  std::fprintf(stderr, "[%s] %.*s\n", kNames[static_cast<int>(l)],
               static_cast<int>(message.size()), message.data());
}
}  // namespace log

}  // namespace seedselect
