#include "adaflow/mutation.hpp"

#include <algorithm>
#include <set>

namespace adaflow {

const Uid& mutation_pipeline(const Mutation& m) {
  return std::visit([](const auto& op) -> const Uid& { return op.pipeline; },
                    m);
}

namespace {

Pipeline& pipeline_or_throw(Workflow& wf, const Uid& uid) {
  Pipeline* p = wf.find_pipeline(uid);
  if (!p) throw EngineError("unknown pipeline: " + uid);
  return *p;
}

void collect_uids(const Workflow& wf, std::set<Uid>& uids) {
  for (const auto& p : wf.pipelines) {
    uids.insert(p.uid);
    for (const auto& s : p.stages) {
      uids.insert(s.uid);
      for (const auto& t : s.tasks) uids.insert(t.uid);
    }
  }
}

void apply_append(Workflow& wf, const AppendStage& op) {
  Pipeline& p = pipeline_or_throw(wf, op.pipeline);
  if (is_terminal(p.state))
    throw MutationGuardViolation("append to terminal pipeline " + p.uid);
  if (op.stage.tasks.empty())
    throw EngineError("appended stage " + op.stage.uid + " has no tasks");
  if (op.stage.state != RunState::PENDING)
    throw MutationGuardViolation("appended stage " + op.stage.uid +
                                 " must start PENDING");
  std::set<Uid> uids;
  collect_uids(wf, uids);
  if (uids.count(op.stage.uid))
    throw EngineError("uid collision appending stage " + op.stage.uid);
  for (const auto& t : op.stage.tasks) {
    if (uids.count(t.uid))
      throw EngineError("uid collision appending task " + t.uid);
    if (t.cores < 1) throw EngineError("task " + t.uid + " has cores < 1");
  }
  p.stages.push_back(op.stage);
}

void apply_reorder(Workflow& wf, const ReorderFutureStages& op) {
  Pipeline& p = pipeline_or_throw(wf, op.pipeline);
  if (is_terminal(p.state))
    throw MutationGuardViolation("reorder in terminal pipeline " + p.uid);
  if (op.first_index > p.stages.size())
    throw EngineError("reorder first_index out of range in " + p.uid);
  const std::size_t n = p.stages.size() - op.first_index;
  if (op.permutation.size() != n)
    throw EngineError("reorder permutation size mismatch in " + p.uid);
  std::vector<bool> seen(n, false);
  for (std::size_t idx : op.permutation) {
    if (idx >= n || seen[idx])
      throw EngineError("reorder permutation invalid in " + p.uid);
    seen[idx] = true;
  }
  for (std::size_t i = op.first_index; i < p.stages.size(); ++i)
    if (p.stages[i].state != RunState::PENDING)
      throw MutationGuardViolation("reorder touches non-pending stage " +
                                   p.stages[i].uid);
  if (op.first_index < p.cursor)
    throw MutationGuardViolation("reorder reaches behind the pipeline cursor");
  std::vector<Stage> reordered;
  reordered.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    reordered.push_back(std::move(p.stages[op.first_index + op.permutation[i]]));
  for (std::size_t i = 0; i < n; ++i)
    p.stages[op.first_index + i] = std::move(reordered[i]);
}

void apply_set_cores(Workflow& wf, const SetTaskCores& op) {
  Pipeline& p = pipeline_or_throw(wf, op.pipeline);
  Stage* s = p.find_stage(op.stage);
  if (!s) throw EngineError("unknown stage: " + op.stage);
  if (s->state != RunState::PENDING)
    throw MutationGuardViolation("property change on non-pending stage " +
                                 s->uid);
  for (auto& t : s->tasks) {
    if (t.uid != op.task) continue;
    if (op.cores < 1) throw EngineError("cores must be >= 1");
    t.cores = op.cores;
    return;
  }
  throw EngineError("unknown task: " + op.task + " in stage " + op.stage);
}

}  // namespace

void apply_mutation(Workflow& wf, const Mutation& m) {
  std::visit(
      [&wf](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, AppendStage>)
          apply_append(wf, op);
        else if constexpr (std::is_same_v<T, ReorderFutureStages>)
          apply_reorder(wf, op);
        else
          apply_set_cores(wf, op);
      },
      m);
}

}  // namespace adaflow
