#include "adaflow/resource_pool.hpp"

#include <algorithm>

namespace adaflow {

const char* to_string(PoolState s) {
  switch (s) {
    case PoolState::NEW: return "NEW";
    case PoolState::ACTIVE: return "ACTIVE";
    case PoolState::DONE: return "DONE";
    case PoolState::FAILED: return "FAILED";
  }
  return "?";
}

int Placement::total_cores() const {
  int total = 0;
  for (const auto& [node, cores] : node_cores) total += cores;
  return total;
}

ResourcePool::ResourcePool(ResourceRequest req, std::uint64_t pool_id)
    : req_(req), id_(pool_id) {
  if (req_.nodes < 1 || req_.cores_per_node < 1)
    throw AllocationFailure("pool must have at least one node and core");
  node_free_.assign(static_cast<std::size_t>(req_.nodes), req_.cores_per_node);
}

void ResourcePool::activate() {
  if (state_ != PoolState::NEW)
    throw AllocationFailure("pool " + std::to_string(id_) +
                            " activated twice");
  state_ = PoolState::ACTIVE;
  activated_at_ = monotonic_now();
}

void ResourcePool::finish() {
  if (state_ == PoolState::ACTIVE) state_ = PoolState::DONE;
}

void ResourcePool::fail() {
  state_ = PoolState::FAILED;
  release_all();
}

bool ResourcePool::walltime_expired() const {
  if (state_ != PoolState::ACTIVE) return false;
  return ns_to_s(monotonic_now() - activated_at_) >= req_.walltime_s;
}

double ResourcePool::remaining_walltime_s() const {
  if (state_ != PoolState::ACTIVE) return 0.0;
  return req_.walltime_s - ns_to_s(monotonic_now() - activated_at_);
}

std::optional<Placement> ResourcePool::try_place(const TaskSpec& t) {
  if (state_ != PoolState::ACTIVE) return std::nullopt;
  if (claims_.count(t.uid))
    throw AllocationFailure("task " + t.uid + " already placed");
  Placement placement;
  if (t.placement == NodePlacement::single_node) {
    for (std::size_t n = 0; n < node_free_.size(); ++n) {
      if (node_free_[n] >= t.cores) {
        node_free_[n] -= t.cores;
        placement.node_cores.push_back({static_cast<int>(n), t.cores});
        claims_[t.uid] = placement;
        return placement;
      }
    }
    return std::nullopt;
  }
  // multi_node: whole nodes only.
  std::vector<std::size_t> free_nodes;
  for (std::size_t n = 0; n < node_free_.size(); ++n)
    if (node_free_[n] == req_.cores_per_node) free_nodes.push_back(n);
  if (free_nodes.size() < static_cast<std::size_t>(t.node_count))
    return std::nullopt;
  for (int k = 0; k < t.node_count; ++k) {
    std::size_t n = free_nodes[static_cast<std::size_t>(k)];
    node_free_[n] = 0;
    placement.node_cores.push_back({static_cast<int>(n), req_.cores_per_node});
  }
  claims_[t.uid] = placement;
  return placement;
}

bool ResourcePool::can_ever_place(const TaskSpec& t) const {
  if (t.placement == NodePlacement::single_node)
    return t.cores <= req_.cores_per_node;
  return t.node_count <= req_.nodes;
}

void ResourcePool::release(const Uid& task_uid) {
  auto it = claims_.find(task_uid);
  if (it == claims_.end()) return;  // pool failure already swept the claim
  for (const auto& [node, cores] : it->second.node_cores)
    node_free_[static_cast<std::size_t>(node)] += cores;
  claims_.erase(it);
}

void ResourcePool::release_all() {
  node_free_.assign(static_cast<std::size_t>(req_.nodes), req_.cores_per_node);
  claims_.clear();
}

int ResourcePool::free_cores() const {
  int total = 0;
  for (int f : node_free_) total += f;
  return total;
}

int ResourcePool::busy_cores() const {
  return req_.nodes * req_.cores_per_node - free_cores();
}

std::vector<Uid> ResourcePool::placed_tasks() const {
  std::vector<Uid> uids;
  for (const auto& [uid, placement] : claims_) uids.push_back(uid);
  return uids;
}

ScheduleOutcome schedule_ready_tasks(ResourcePool& pool,
                                     const std::vector<TaskSpec>& ready) {
  ScheduleOutcome outcome;
  for (const auto& t : ready) {
    if (!pool.can_ever_place(t)) {
      outcome.rejected.push_back(t.uid);
      continue;
    }
    if (auto placement = pool.try_place(t))
      outcome.assigned.push_back({t.uid, *placement});
    else
      outcome.deferred.push_back(t.uid);
  }
  return outcome;
}

FailureAction handle_task_failure(const RetryPolicy& policy, int attempts) {
  if (attempts <= policy.max_retries) return FailureAction::Resubmit;
  return policy.abort_on_exhaust ? FailureAction::AbortStage
                                 : FailureAction::Ignore;
}

}  // namespace adaflow
