#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace adaflow {

using Uid = std::string;
using Nanos = std::int64_t;

/// Monotonic timestamp in nanoseconds (steady clock, process-wide origin).
inline Nanos monotonic_now() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

inline double ns_to_s(Nanos ns) { return static_cast<double>(ns) * 1e-9; }

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

struct EngineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A post-execution branch touched an entity that is not strictly in the
/// future of the trigger (DONE, RUNNING, or SUBMITTED entities are off-limits).
struct MutationGuardViolation : EngineError {
  using EngineError::EngineError;
};

/// A user-supplied condition or branch function threw, or an adaptation could
/// not be committed.
struct AdaptationFailed : EngineError {
  AdaptationFailed(Uid trigger, const std::string& what)
      : EngineError("adaptation failed (trigger " + trigger + "): " + what),
        trigger_uid(std::move(trigger)) {}
  Uid trigger_uid;
};

struct BusError : EngineError {
  using EngineError::EngineError;
};

struct AllocationFailure : EngineError {
  using EngineError::EngineError;
};

struct ExecutorFailure : EngineError {
  using EngineError::EngineError;
};

struct CheckpointError : EngineError {
  CheckpointError(std::string r, const std::string& what)
      : EngineError("checkpoint: " + what), reason(std::move(r)) {}
  std::string reason;  // e.g. "log_gap", "checksum_mismatch", "bad_header"
};

// ---------------------------------------------------------------------------
// Seeded randomness
// ---------------------------------------------------------------------------

/// Deterministic RNG wrapper. Draws go through our own bounded-draw and
/// Fisher-Yates code so sequences are stable across standard libraries
/// (std::shuffle and the distributions are implementation-defined).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  /// Uniform draw in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) { return eng_() % n; }

  /// Uniform draw in [lo, hi] inclusive.
  std::int64_t next_in(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next_below(
                    static_cast<std::uint64_t>(hi - lo + 1)));
  }

  /// Uniform real in [0, 1).
  double next_unit() {
    return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Random permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  std::mt19937_64 eng_;
};

/// splitmix64 finalizer; used to derive independent seed streams.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix_seed(base ^ mix_seed(a ^ mix_seed(b ^ mix_seed(c))));
}

// ---------------------------------------------------------------------------
// Checksums
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v);

// ---------------------------------------------------------------------------
// Logging (stderr, level from ENGINE_LOG_LEVEL: error|warn|info|debug)
// ---------------------------------------------------------------------------

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_threshold();
void log_line(LogLevel level, const std::string& msg);

#define ADAFLOW_LOG(level, msg)                                       \
  do {                                                                \
    if (static_cast<int>(level) <= static_cast<int>(::adaflow::log_threshold())) \
      ::adaflow::log_line(level, (msg));                              \
  } while (0)

inline void log_error(const std::string& m) { ADAFLOW_LOG(LogLevel::error, m); }
inline void log_warn(const std::string& m) { ADAFLOW_LOG(LogLevel::warn, m); }
inline void log_info(const std::string& m) { ADAFLOW_LOG(LogLevel::info, m); }
inline void log_debug(const std::string& m) { ADAFLOW_LOG(LogLevel::debug, m); }

}  // namespace adaflow
