#include "adaflow/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace adaflow {

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

LogLevel log_threshold() {
  static LogLevel cached = [] {
    const char* raw = std::getenv("ENGINE_LOG_LEVEL");
    if (!raw) return LogLevel::warn;
    std::string v(raw);
    if (v == "error") return LogLevel::error;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::warn;
  }();
  return cached;
}

void log_line(LogLevel level, const std::string& msg) {
  static std::mutex mu;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::fprintf(stderr, "[adaflow %s] %s\n", names[static_cast<int>(level)],
               msg.c_str());
}

}  // namespace adaflow
