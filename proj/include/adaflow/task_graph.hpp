#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "adaflow/workflow.hpp"

namespace adaflow {

/// Task attributes that participate in graph comparison. Runtime state does
/// not belong here: two snapshots of the same graph taken at different
/// execution points must compare equal.
struct VertexProps {
  std::string executable;
  std::vector<std::string> arguments;
  int cores = 1;
  NodePlacement placement = NodePlacement::single_node;
  int node_count = 1;

  bool operator==(const VertexProps&) const = default;
};

VertexProps vertex_props(const TaskSpec& t);

/// Directed task graph. Edges point from a task to every task of the next
/// stage in the same pipeline (complete bipartite between consecutive
/// stages); pipelines contribute disjoint components.
///
/// Edges store ordinals into the sorted vertex uid sequence (the map's
/// iteration order) and are kept sorted and unique, so graph equality is
/// plain container comparison. Ordinals from different graphs are comparable
/// only when the uid sets match; every classification predicate that touches
/// edges establishes that first. Hooks rebuild graphs on every staged
/// mutation, which is why edges avoid per-edge string storage.
struct TaskGraph {
  std::map<Uid, VertexProps> vertices;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

  bool operator==(const TaskGraph&) const = default;
};

TaskGraph to_task_graph(const Workflow& wf);
TaskGraph to_task_graph(const Pipeline& p);

/// Edges resolved back to uid pairs (for serialization and diagnostics).
std::vector<std::pair<Uid, Uid>> edge_uids(const TaskGraph& g);

bool is_dag(const TaskGraph& g);

// ---------------------------------------------------------------------------
// Adaptation classification
// ---------------------------------------------------------------------------

enum class AdaptationType { TASK_COUNT, TASK_ORDER, TASK_PROPERTY };

const char* to_string(AdaptationType t);

struct Classification {
  std::set<AdaptationType> types;  // empty set: no classified adaptation
  std::vector<std::string> notes;  // diagnostics for unclassified shapes
};

/// Compares two task-graph snapshots and reports which adaptation kinds the
/// transition exhibits. Each kind has its own predicate; the predicates are
/// checked independently, so a transition can satisfy none of them.
///
///   TASK_COUNT     vertex count and edge count both changed
///   TASK_ORDER     identical vertices (uids and properties), different edges
///   TASK_PROPERTY  same uids, same edges, some vertex properties changed
Classification classify_adaptation(const TaskGraph& before,
                                   const TaskGraph& after);

}  // namespace adaflow
