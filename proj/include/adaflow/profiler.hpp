#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "adaflow/common.hpp"

namespace adaflow {

enum class EventKind {
  TASK_SUBMIT,
  TASK_START,
  TASK_END,
  STAGE_START,
  STAGE_END,
  ADAPT_START,
  ADAPT_END,
  SYNC_START,
  SYNC_ACK,
};

const char* to_string(EventKind k);
std::optional<EventKind> event_kind_from_string(const std::string& s);

struct ProfileEvent {
  std::string entity;  // hierarchical path: pipeline[/stage[/task]]
  EventKind kind;
  Nanos t = 0;
};

/// Timestamped event recorder. Thread-safe; events are kept in record order,
/// which equals time order per entity because each entity's lifecycle is
/// driven from one thread at a time.
class Profiler {
 public:
  void record(const std::string& entity, EventKind kind) {
    record_at(entity, kind, monotonic_now());
  }
  void record_at(const std::string& entity, EventKind kind, Nanos t);

  std::vector<ProfileEvent> events() const;

  /// CSV with header `entity_uid,event,timestamp_ns`.
  void write_csv(const std::string& path) const;

 private:
  mutable std::mutex mu_;
  std::vector<ProfileEvent> events_;
};

std::vector<ProfileEvent> read_profile_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct RunMetrics {
  /// Sum over adaptations of (ADAPT_END - ADAPT_START) plus the sync windows
  /// (SYNC_ACK - SYNC_START). Pairing is per entity, in event order.
  double adaptation_overhead_s = 0.0;

  /// Per pipeline: sum over its executed stages of the stage's task span
  /// (latest TASK_END minus earliest TASK_START among the stage's tasks).
  std::map<std::string, double> task_execution_time_s;

  double total_task_execution_time_s() const;
};

RunMetrics compute_metrics(const std::vector<ProfileEvent>& events);

struct ProfileFlag {
  std::string kind;    // "order_violation" | "duplicate_event"
  std::string entity;
  std::string detail;
};

/// Sanity checks on a trace: per-entity start/end ordering and duplicate
/// lifecycle events. Duplicates are expected in retry traces and are only
/// flagged, never fatal.
std::vector<ProfileFlag> check_trace(const std::vector<ProfileEvent>& events);

}  // namespace adaflow
