#include "adaflow/task_graph.hpp"

#include <algorithm>
#include <string_view>
#include <unordered_map>

namespace adaflow {

VertexProps vertex_props(const TaskSpec& t) {
  return VertexProps{t.executable, t.arguments, t.cores, t.placement,
                     t.node_count};
}

namespace {

using UidIndex = std::unordered_map<std::string_view, std::uint32_t>;

void collect_vertices(const Pipeline& p, TaskGraph& g) {
  for (const auto& s : p.stages)
    for (const auto& t : s.tasks) g.vertices[t.uid] = vertex_props(t);
}

void emit_edges(const Pipeline& p, const UidIndex& index, TaskGraph& g) {
  std::size_t pairs = 0;
  for (std::size_t i = 0; i + 1 < p.stages.size(); ++i)
    pairs += p.stages[i].tasks.size() * p.stages[i + 1].tasks.size();
  g.edges.reserve(g.edges.size() + pairs);
  std::vector<std::uint32_t> to_idx;
  for (std::size_t i = 0; i + 1 < p.stages.size(); ++i) {
    to_idx.clear();
    for (const auto& to : p.stages[i + 1].tasks)
      to_idx.push_back(index.at(to.uid));
    for (const auto& from : p.stages[i].tasks) {
      const std::uint32_t f = index.at(from.uid);
      for (std::uint32_t t : to_idx) g.edges.emplace_back(f, t);
    }
  }
}

TaskGraph build_graph(const std::vector<const Pipeline*>& pipelines) {
  TaskGraph g;
  for (const Pipeline* p : pipelines) collect_vertices(*p, g);
  UidIndex index;
  index.reserve(g.vertices.size());
  std::uint32_t ordinal = 0;
  for (const auto& [uid, props] : g.vertices) index.emplace(uid, ordinal++);
  for (const Pipeline* p : pipelines) emit_edges(*p, index, g);
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

}  // namespace

TaskGraph to_task_graph(const Workflow& wf) {
  std::vector<const Pipeline*> ptrs;
  ptrs.reserve(wf.pipelines.size());
  for (const auto& p : wf.pipelines) ptrs.push_back(&p);
  return build_graph(ptrs);
}

TaskGraph to_task_graph(const Pipeline& p) { return build_graph({&p}); }

std::vector<std::pair<Uid, Uid>> edge_uids(const TaskGraph& g) {
  std::vector<const Uid*> table;
  table.reserve(g.vertices.size());
  for (const auto& [uid, props] : g.vertices) table.push_back(&uid);
  std::vector<std::pair<Uid, Uid>> out;
  out.reserve(g.edges.size());
  for (const auto& [from, to] : g.edges)
    out.emplace_back(*table.at(from), *table.at(to));
  return out;
}

bool is_dag(const TaskGraph& g) {
  // Kahn's algorithm; graph is a DAG iff every vertex gets popped.
  const std::uint32_t n = static_cast<std::uint32_t>(g.vertices.size());
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<std::uint32_t>> out(n);
  for (const auto& [from, to] : g.edges) {
    if (from >= n || to >= n) return false;
    ++indeg[to];
    out[from].push_back(to);
  }
  std::vector<std::uint32_t> queue;
  for (std::uint32_t v = 0; v < n; ++v)
    if (indeg[v] == 0) queue.push_back(v);
  std::size_t popped = 0;
  while (!queue.empty()) {
    std::uint32_t u = queue.back();
    queue.pop_back();
    ++popped;
    for (std::uint32_t v : out[u])
      if (--indeg[v] == 0) queue.push_back(v);
  }
  return popped == g.vertices.size();
}

const char* to_string(AdaptationType t) {
  switch (t) {
    case AdaptationType::TASK_COUNT: return "TASK_COUNT";
    case AdaptationType::TASK_ORDER: return "TASK_ORDER";
    case AdaptationType::TASK_PROPERTY: return "TASK_PROPERTY";
  }
  return "?";
}

Classification classify_adaptation(const TaskGraph& before,
                                   const TaskGraph& after) {
  Classification c;

  const bool vertex_count_differs = before.vertices.size() != after.vertices.size();
  const bool edge_count_differs = before.edges.size() != after.edges.size();
  if (vertex_count_differs && edge_count_differs)
    c.types.insert(AdaptationType::TASK_COUNT);

  // Full vertex equality: same uid set and identical properties per uid.
  const bool vertices_equal = before.vertices == after.vertices;
  const bool edges_equal = before.edges == after.edges;
  if (vertices_equal && !edges_equal)
    c.types.insert(AdaptationType::TASK_ORDER);

  bool same_uid_set = before.vertices.size() == after.vertices.size();
  if (same_uid_set) {
    auto a = before.vertices.begin();
    auto b = after.vertices.begin();
    for (; a != before.vertices.end(); ++a, ++b) {
      if (a->first != b->first) {
        same_uid_set = false;
        break;
      }
    }
  }
  if (same_uid_set && edges_equal && !vertices_equal)
    c.types.insert(AdaptationType::TASK_PROPERTY);

  if (c.types.empty() && !(vertices_equal && edges_equal)) {
    if (vertex_count_differs && !edge_count_differs)
      c.notes.push_back(
          "vertex-only change: vertex count differs but edge count does not; "
          "no adaptation kind matches this transition");
    else
      c.notes.push_back("unclassified graph change");
  }
  return c;
}

}  // namespace adaflow
