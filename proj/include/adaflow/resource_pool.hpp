#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "adaflow/workflow.hpp"

namespace adaflow {

/// Resource request for one pool allocation. Capacity is nodes x
/// cores_per_node; walltime bounds how long the allocation may run before the
/// pool fails and running work is lost.
struct ResourceRequest {
  int nodes = 1;
  int cores_per_node = 1;
  double walltime_s = 3600.0;
};

enum class PoolState { NEW, ACTIVE, DONE, FAILED };

const char* to_string(PoolState s);

/// Cores claimed for one task: (node index, cores on that node).
struct Placement {
  std::vector<std::pair<int, int>> node_cores;
  int total_cores() const;
};

/// Simulated pilot allocation. Tracks per-node free cores; placement is
/// first-fit greedy in node order. Not thread-safe; the owner serializes
/// access.
class ResourcePool {
 public:
  ResourcePool(ResourceRequest req, std::uint64_t pool_id);

  std::uint64_t id() const { return id_; }
  const ResourceRequest& request() const { return req_; }
  PoolState state() const { return state_; }

  void activate();            // NEW -> ACTIVE, starts the walltime clock
  void finish();              // ACTIVE -> DONE
  void fail();                // any -> FAILED; releases everything
  bool walltime_expired() const;
  double remaining_walltime_s() const;

  /// Claims cores for the task and records the claim under the task uid.
  /// single_node tasks take `cores` on the first node with room; multi_node
  /// tasks take `node_count` whole nodes. nullopt if nothing fits right now.
  std::optional<Placement> try_place(const TaskSpec& t);

  /// Whether the task could fit in an empty pool of this shape. False means
  /// deferral is pointless and the task is unschedulable here.
  bool can_ever_place(const TaskSpec& t) const;

  void release(const Uid& task_uid);
  void release_all();

  int free_cores() const;
  int busy_cores() const;
  std::vector<Uid> placed_tasks() const;

 private:
  ResourceRequest req_;
  std::uint64_t id_;
  PoolState state_ = PoolState::NEW;
  Nanos activated_at_ = 0;
  std::vector<int> node_free_;  // free cores per node
  std::map<Uid, Placement> claims_;
};

// ---------------------------------------------------------------------------
// Scheduling and failure policy
// ---------------------------------------------------------------------------

struct ScheduleOutcome {
  std::vector<std::pair<Uid, Placement>> assigned;
  std::vector<Uid> deferred;   // no room now, retry when cores free up
  std::vector<Uid> rejected;   // can never fit this pool shape
};

/// First-fit greedy pass over ready tasks in the given order.
ScheduleOutcome schedule_ready_tasks(ResourcePool& pool,
                                     const std::vector<TaskSpec>& ready);

struct RetryPolicy {
  int max_retries = 1;          // extra launches after the first failure
  bool abort_on_exhaust = true; // false: mark ignored and let the stage finish
};

enum class FailureAction { Resubmit, Ignore, AbortStage };

/// attempts counts launches so far (>= 1 when a failure is being handled).
FailureAction handle_task_failure(const RetryPolicy& policy, int attempts);

}  // namespace adaflow
