#include "adaflow/adaptation.hpp"

#include <algorithm>

#include "adaflow/serialize.hpp"

namespace adaflow {

const Pipeline& SignalContext::pipeline() const {
  const Pipeline* p = workflow_view->find_pipeline(pipeline_uid);
  if (!p) throw EngineError("signal context: unknown pipeline " + pipeline_uid);
  return *p;
}

const std::string& SignalContext::workflow_json() const {
  if (cached_json_.empty())
    cached_json_ = workflow_to_json_string(*workflow_view);
  return cached_json_;
}

// ---------------------------------------------------------------------------
// AdaptableView
// ---------------------------------------------------------------------------

AdaptableView::AdaptableView(const Workflow& snapshot, Uid pipeline_uid)
    : shadow_(snapshot),
      working_(*[this, &pipeline_uid] {
        Pipeline* p = shadow_.find_pipeline(pipeline_uid);
        if (!p) throw EngineError("adaptable view: unknown pipeline " +
                                  pipeline_uid);
        return p;
      }()),
      pipeline_uid_(std::move(pipeline_uid)),
      boundary_(working_.cursor) {}

void AdaptableView::ensure_graph() {
  if (last_graph_) return;
  last_graph_ = to_task_graph(working_);
  for (const auto& p : shadow_.pipelines) {
    taken_uids_.insert(p.uid);
    for (const auto& s : p.stages) {
      taken_uids_.insert(s.uid);
      for (const auto& t : s.tasks) taken_uids_.insert(t.uid);
    }
  }
}

std::vector<const Stage*> AdaptableView::future_stages() const {
  std::vector<const Stage*> out;
  for (std::size_t i = boundary_; i < working_.stages.size(); ++i)
    out.push_back(&working_.stages[i]);
  return out;
}

void AdaptableView::classify_step() {
  TaskGraph now = to_task_graph(working_);
  Classification c = classify_adaptation(*last_graph_, now);
  types_.insert(c.types.begin(), c.types.end());
  notes_.insert(notes_.end(), c.notes.begin(), c.notes.end());
  last_graph_ = std::move(now);
}

Uid AdaptableView::fresh_stage_uid() {
  for (;;) {
    Uid candidate = pipeline_uid_ + ".s" + std::to_string(stage_counter_++);
    if (!taken_uids_.count(candidate)) return candidate;
  }
}

const Stage& AdaptableView::append_stage(Stage stage) {
  ensure_graph();
  if (stage.uid.empty()) stage.uid = fresh_stage_uid();
  taken_uids_.insert(stage.uid);
  for (std::size_t i = 0; i < stage.tasks.size(); ++i) {
    if (stage.tasks[i].uid.empty())
      stage.tasks[i].uid = stage.uid + ".t" + std::to_string(i);
    taken_uids_.insert(stage.tasks[i].uid);
  }
  Mutation m = AppendStage{pipeline_uid_, std::move(stage)};
  apply_mutation(shadow_, m);
  staged_.push_back(std::move(m));
  classify_step();
  return working_.stages.back();
}

void AdaptableView::reorder_future_stages(
    const std::vector<std::size_t>& permutation) {
  ensure_graph();
  Mutation m = ReorderFutureStages{pipeline_uid_, boundary_, permutation};
  apply_mutation(shadow_, m);
  staged_.push_back(std::move(m));
  classify_step();
}

void AdaptableView::set_task_cores(const Uid& stage_uid, const Uid& task_uid,
                                   int cores) {
  ensure_graph();
  Mutation m = SetTaskCores{pipeline_uid_, stage_uid, task_uid, cores};
  apply_mutation(shadow_, m);
  staged_.push_back(std::move(m));
  classify_step();
}

// ---------------------------------------------------------------------------
// Hook evaluation
// ---------------------------------------------------------------------------

const char* to_string(Branch b) {
  switch (b) {
    case Branch::None: return "none";
    case Branch::True: return "on_true";
    case Branch::False: return "on_false";
  }
  return "?";
}

HookOutcome evaluate_post_exec(const AdaptationPolicy& policy,
                               const SignalContext& ctx, AdaptableView& view) {
  HookOutcome out;
  out.condition_value = true;
  if (policy.condition) {
    try {
      out.condition_value = policy.condition(ctx);
    } catch (const std::exception& e) {
      throw AdaptationFailed(ctx.source_uid,
                             std::string("condition threw: ") + e.what());
    }
  }
  const BranchFn& fn = out.condition_value ? policy.on_true : policy.on_false;
  if (!fn) {
    out.branch = Branch::None;
    return out;
  }
  out.branch = out.condition_value ? Branch::True : Branch::False;
  try {
    fn(ctx, view);
  } catch (const MutationGuardViolation&) {
    throw;
  } catch (const std::exception& e) {
    throw AdaptationFailed(ctx.source_uid,
                           std::string("branch threw: ") + e.what());
  }
  return out;
}

BranchFn compose_branches(std::vector<BranchFn> fns) {
  return [fns = std::move(fns)](const SignalContext& ctx, AdaptableView& view) {
    for (auto it = fns.rbegin(); it != fns.rend(); ++it)
      if (*it) (*it)(ctx, view);
  };
}

// ---------------------------------------------------------------------------
// Builtins
// ---------------------------------------------------------------------------

ConditionFn cond_always() {
  return [](const SignalContext&) { return true; };
}

ConditionFn cond_never() {
  return [](const SignalContext&) { return false; };
}

ConditionFn cond_max_count(int n) {
  auto counter = std::make_shared<int>(0);
  return [counter, n](const SignalContext&) { return (*counter)++ < n; };
}

ConditionFn cond_stage_count_below(int n) {
  return [n](const SignalContext& ctx) {
    return ctx.pipeline().stages.size() < static_cast<std::size_t>(n);
  };
}

BranchFn branch_add_stages(int n_stages, int tasks_per_stage,
                           TaskSpec task_template, bool inherit_hook) {
  return [=](const SignalContext& ctx, AdaptableView& view) {
    std::optional<std::string> hook;
    if (inherit_hook) {
      if (const Stage* src = ctx.pipeline().find_stage(ctx.source_uid))
        hook = src->post_exec;
      else if (ctx.source_uid == ctx.pipeline_uid)
        hook = ctx.pipeline().post_exec;
    }
    for (int k = 0; k < n_stages; ++k) {
      Stage s;
      s.post_exec = hook;
      for (int i = 0; i < tasks_per_stage; ++i) {
        TaskSpec t = task_template;
        t.uid.clear();
        s.tasks.push_back(std::move(t));
      }
      view.append_stage(std::move(s));
    }
  };
}

BranchFn branch_shuffle_remaining(std::uint64_t seed) {
  auto rng = std::make_shared<SeededRng>(seed);
  return [rng](const SignalContext&, AdaptableView& view) {
    std::size_t n = view.future_stages().size();
    if (n > 1) view.reorder_future_stages(rng->permutation(n));
  };
}

BranchFn branch_randomize_cores(std::uint64_t seed, int max_cores) {
  auto rng = std::make_shared<SeededRng>(seed);
  return [rng, max_cores](const SignalContext&, AdaptableView& view) {
    auto future = view.future_stages();
    if (future.empty()) return;
    const Stage* next = future.front();
    const Uid stage_uid = next->uid;
    std::vector<Uid> task_uids;
    for (const auto& t : next->tasks) task_uids.push_back(t.uid);
    for (const auto& uid : task_uids) {
      int cores = 1 + static_cast<int>(rng->next_below(
                          static_cast<std::uint64_t>(max_cores - 1)));
      view.set_task_cores(stage_uid, uid, cores);
    }
  };
}

BranchFn branch_noop() {
  return [](const SignalContext&, AdaptableView&) {};
}

}  // namespace adaflow
