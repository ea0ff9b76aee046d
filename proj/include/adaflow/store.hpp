#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "adaflow/mutation.hpp"
#include "adaflow/task_graph.hpp"

namespace adaflow {

struct TaskRuntime {
  TaskState state = TaskState::PENDING;
  int attempts = 0;  // launches so far
  int exit_code = 0;
  bool ignored = false;  // failed but tolerated by policy

  bool operator==(const TaskRuntime&) const = default;
};

// ---------------------------------------------------------------------------
// Deltas
// ---------------------------------------------------------------------------

struct TaskStateChange {
  std::string path;  // pipeline/stage/task
  TaskState state = TaskState::PENDING;
  int attempts = 0;
  int exit_code = 0;
  bool ignored = false;
};

struct StageStateChange {
  Uid pipeline;
  Uid stage;
  RunState state = RunState::PENDING;
};

struct PipelineStateChange {
  Uid pipeline;
  RunState state = RunState::PENDING;
};

struct CursorChange {
  Uid pipeline;
  std::size_t cursor = 0;
};

/// Plain state progression: no graph shape change. Appliers are idempotent;
/// stale or repeated changes degrade to no-ops so at-least-once delivery is
/// safe.
struct StateDelta {
  std::vector<TaskStateChange> tasks;
  std::vector<StageStateChange> stages;
  std::vector<PipelineStateChange> pipelines;
  std::vector<CursorChange> cursors;
  std::vector<std::string> handled_triggers;
};

/// Graph mutation bundle from one adaptation. Commits only when base_version
/// still matches the store (optimistic concurrency); the trigger id lands in
/// the handled set so recovery can tell evaluated hooks from lost ones.
struct SyncDelta {
  std::uint64_t base_version = 0;
  Uid pipeline;
  std::string trigger_id;
  std::vector<Mutation> mutations;
  std::set<AdaptationType> classified_types;
};

struct Ack {
  std::uint64_t version = 0;
};
struct Reject {
  std::string reason;  // "version_mismatch" | "pipeline_terminal"
};
using SyncResult = std::variant<Ack, Reject>;

inline bool accepted(const SyncResult& r) {
  return std::holds_alternative<Ack>(r);
}

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

struct StoreSnapshot {
  std::shared_ptr<const Workflow> workflow;
  std::map<std::string, TaskRuntime> tasks;
  std::set<std::string> handled_triggers;
  std::uint64_t version = 0;
};

/// Delta application against a (workflow, task table, handled set) triple.
/// Shared by the store and by the workflow processor's local mirror so the
/// two can never drift in semantics. Idempotent: stale and duplicate changes
/// degrade to no-ops; genuinely illegal transitions throw EngineError.
void apply_state_delta(Workflow& wf, std::map<std::string, TaskRuntime>& tasks,
                       std::set<std::string>& handled, const StateDelta& d);
void apply_sync_delta(Workflow& wf, std::map<std::string, TaskRuntime>& tasks,
                      std::set<std::string>& handled, const SyncDelta& d);
void index_workflow_tasks(const Workflow& wf,
                          std::map<std::string, TaskRuntime>& tasks);

/// Authoritative workflow state. Every change enters as a delta; each applied
/// delta bumps the version by exactly one and, when a journal is attached,
/// appends one checksummed record. The caller side serializes access through
/// one writer; the internal mutex protects concurrent readers.
class GlobalGraphStore {
 public:
  explicit GlobalGraphStore(Workflow initial);

  std::uint64_t version() const;
  StoreSnapshot snapshot() const;
  TaskRuntime task_runtime(const std::string& path) const;

  /// Applies a state delta; returns the new version.
  std::uint64_t commit_state(const StateDelta& delta);

  SyncResult propose_adaptation(const SyncDelta& delta);

  /// At-least-once command dedup: outcomes recorded under a correlation id
  /// are returned verbatim on redelivery instead of re-applying.
  std::optional<std::string> command_outcome(const std::string& corr) const;
  void record_command_outcome(const std::string& corr, std::string outcome);

  // -- journal ------------------------------------------------------------

  /// Starts appending to `path`. Must be called before the first commit;
  /// writes the header record (base workflow + checksum).
  void attach_journal(const std::string& path);

  /// Rebuilds a store from a journal and keeps appending to it. A damaged
  /// final record is dropped (interrupted write); damage anywhere else
  /// throws CheckpointError.
  static std::unique_ptr<GlobalGraphStore> from_journal(
      const std::string& path);

  struct LogEntry {
    std::uint64_t version = 0;
    std::variant<StateDelta, SyncDelta> delta;
  };
  std::vector<LogEntry> log() const;

 private:
  void journal_append_locked(const LogEntry& entry);

  mutable std::mutex mu_;
  Workflow workflow_;
  std::map<std::string, TaskRuntime> tasks_;
  std::set<std::string> handled_triggers_;
  std::uint64_t version_ = 0;
  std::vector<LogEntry> log_;
  std::map<std::string, std::string> command_outcomes_;
  std::ofstream journal_;
  std::string journal_path_;
};

}  // namespace adaflow
