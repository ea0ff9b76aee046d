#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adaflow/common.hpp"

namespace adaflow {

// ---------------------------------------------------------------------------
// Entity states
// ---------------------------------------------------------------------------

enum class TaskState {
  PENDING,    // described, not yet eligible
  READY,      // eligible for scheduling
  SUBMITTED,  // handed to an executor slot
  RUNNING,
  DONE,
  FAILED,
  CANCELED,
};

enum class RunState { PENDING, SCHEDULED, DONE, FAILED };

const char* to_string(TaskState s);
const char* to_string(RunState s);
std::optional<TaskState> task_state_from_string(const std::string& s);
std::optional<RunState> run_state_from_string(const std::string& s);

inline bool is_terminal(TaskState s) {
  return s == TaskState::DONE || s == TaskState::FAILED ||
         s == TaskState::CANCELED;
}
inline bool is_terminal(RunState s) {
  return s == RunState::DONE || s == RunState::FAILED;
}

// ---------------------------------------------------------------------------
// Workflow description
// ---------------------------------------------------------------------------

enum class NodePlacement {
  single_node,  // all cores on one node
  multi_node,   // whole nodes, one core set per node
};

struct TaskSpec {
  Uid uid;
  std::string executable;                 // "kernel:<name>" runs in-process
  std::vector<std::string> arguments;
  int cores = 1;                          // cores per node
  NodePlacement placement = NodePlacement::single_node;
  int node_count = 1;                     // used for multi_node placement
  std::optional<double> duration_hint_s;  // mock executor run time
  std::vector<std::string> input_refs;    // paths relative to shared data dir
  std::map<std::string, std::string> environment;

  bool operator==(const TaskSpec&) const = default;
};

struct Stage {
  Uid uid;
  std::vector<TaskSpec> tasks;  // concurrent set, no intra-stage ordering
  RunState state = RunState::PENDING;
  std::optional<std::string> post_exec;  // policy name, resolved at run time

  bool operator==(const Stage&) const = default;
};

struct Pipeline {
  Uid uid;
  std::vector<Stage> stages;  // strictly sequential
  std::size_t cursor = 0;     // index of the first not-yet-finished stage
  RunState state = RunState::PENDING;
  std::optional<std::string> post_exec;

  bool operator==(const Pipeline&) const = default;

  const Stage* find_stage(const Uid& uid) const;
  Stage* find_stage(const Uid& uid);
};

struct Workflow {
  std::vector<Pipeline> pipelines;
  std::string shared_data_dir;

  bool operator==(const Workflow&) const = default;

  const Pipeline* find_pipeline(const Uid& uid) const;
  Pipeline* find_pipeline(const Uid& uid);
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string rule;    // stable identifier, e.g. "uid.duplicate"
  std::string entity;  // offending uid or path
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Structural checks before a run: non-empty workflow, non-empty pipelines
/// and stages, unique uids across all entities, positive cores/node counts,
/// uids free of path separators (they become directory names).
ValidationReport validate_workflow(const Workflow& wf);

/// "pipeline_uid/stage_uid" or ".../task_uid"; used for profiling and the
/// runtime task table.
std::string entity_path(const Uid& pipeline, const Uid& stage);
std::string entity_path(const Uid& pipeline, const Uid& stage, const Uid& task);

}  // namespace adaflow
