#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include "adaflow/adaptation.hpp"
#include "adaflow/executor.hpp"
#include "adaflow/profiler.hpp"
#include "adaflow/resource_pool.hpp"
#include "adaflow/store.hpp"

namespace adaflow {

enum class ExecutorKind { mock, process };

using PolicySet = std::map<std::string, AdaptationPolicy>;

struct RunConfig {
  std::string run_dir;      // scratch root; task logs and launch log live here
  std::string profile_csv;  // event trace output; empty disables
  std::string journal_path; // defaults to <run_dir>/journal.ndjson
  bool checkpoint = true;
  bool resume = false;      // rebuild from the journal instead of starting fresh

  ExecutorKind executor = ExecutorKind::mock;
  std::shared_ptr<const KernelRegistry> kernels;
  std::optional<FaultPlan> fault_plan;
  RetryPolicy retry;
  double mock_default_duration_s = 0.0;

  double heartbeat_interval_s = 0.25;  // component liveness cadence
  double ack_timeout_s = 10.0;         // store commit round-trip bound
  int max_adaptations_per_pipeline = 10000;
  int max_pool_reallocations = 3;
  std::size_t bus_high_water_mark = 4096;

  // Test hooks. crash_after_stage hard-exits the process (code 86) right
  // after the Nth stage-completion commit; wp_crash_after_messages makes the
  // workflow processor die once, mid-message, to exercise supervision.
  int crash_after_stage = 0;
  int wp_crash_after_messages = 0;
  std::set<std::string> duplicate_completion_for;  // task paths to double-report
};

struct AdaptationRecord {
  Uid pipeline;
  std::string trigger_id;
  std::string policy;
  Branch branch = Branch::None;
  bool condition_value = false;
  std::set<AdaptationType> types;
  std::vector<std::string> notes;
  std::size_t mutation_count = 0;
  std::uint64_t committed_version = 0;  // 0: hook ran but nothing to sync
  Nanos adapt_start = 0, adapt_end = 0;
  Nanos sync_start = 0, sync_ack = 0;   // 0 when no sync happened
};

struct ExecutionSummary {
  bool completed = false;  // every pipeline ended DONE
  std::optional<std::string> abort_reason;
  std::map<Uid, RunState> pipeline_states;
  std::map<std::string, TaskRuntime> task_states;
  std::vector<AdaptationRecord> adaptations;
  int wp_restarts = 0;
  int pool_allocations = 1;
  std::uint64_t store_version = 0;
  std::vector<std::uint64_t> log_versions;  // every committed delta, in order
  Workflow local_workflow;  // processor's working copy at shutdown
  Workflow store_workflow;  // authoritative copy at shutdown
  std::set<std::string> handled_triggers;
  RunMetrics metrics;
  std::vector<ProfileEvent> events;
};

/// Runs a workflow to completion on a simulated pilot of the given shape.
/// Throws EngineError for invalid input; execution-time trouble lands in
/// ExecutionSummary::abort_reason instead.
ExecutionSummary run_workflow(const Workflow& wf, const ResourceRequest& pool,
                              const PolicySet& policies, const RunConfig& cfg);

/// Splits "pipeline/stage/task" (or the 2- and 1-segment prefixes).
std::vector<std::string> split_entity_path(const std::string& path);

}  // namespace adaflow
