#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>

#include "adaflow/mutation.hpp"
#include "adaflow/task_graph.hpp"

namespace adaflow {

struct TaskResult {
  int exit_code = 0;
  int attempts = 1;
  std::vector<std::string> output_files;
};

/// Read-only context handed to post-execution hooks. Snapshots are taken at
/// trigger time; hooks never see concurrent mutation.
struct SignalContext {
  Uid source_uid;     // stage or pipeline whose completion fired the hook
  Uid pipeline_uid;
  std::shared_ptr<const Workflow> workflow_view;
  std::map<Uid, TaskResult> completed_task_results;  // tasks of the trigger
  std::string shared_data_dir;
  int iteration = 0;  // committed adaptations of this pipeline so far

  const Pipeline& pipeline() const;

  /// Serialized snapshot of the whole workflow; cached after first use.
  const std::string& workflow_json() const;

 private:
  mutable std::string cached_json_;
};

/// Mutable working view for a hook branch. Mutations are staged against a
/// private copy of the trigger pipeline; nothing is visible outside until the
/// engine commits the staged list. Each staged step is classified against the
/// previous step's task graph, so composed operators keep their individual
/// signatures.
class AdaptableView {
 public:
  AdaptableView(const Workflow& snapshot, Uid pipeline_uid);

  const Pipeline& pipeline() const { return working_; }
  std::size_t boundary() const { return boundary_; }

  /// Future stages only (index >= boundary); what a reorder may permute.
  std::vector<const Stage*> future_stages() const;

  /// Appends a stage at the end of the pipeline. Empty uids are filled in
  /// with generated ones ("<pipeline>.s<k>" / "<stage>.t<i>").
  const Stage& append_stage(Stage stage);

  /// Permutes the future stages: new[i] = old[permutation[i]], both relative
  /// to the boundary.
  void reorder_future_stages(const std::vector<std::size_t>& permutation);

  void set_task_cores(const Uid& stage_uid, const Uid& task_uid, int cores);

  const std::vector<Mutation>& staged() const { return staged_; }
  const std::set<AdaptationType>& classified_types() const { return types_; }
  const std::vector<std::string>& classification_notes() const {
    return notes_;
  }

 private:
  void ensure_graph();  // builds the before-graph on the first mutation
  void classify_step();
  Uid fresh_stage_uid();

  Workflow shadow_;       // snapshot copy the mutations run against
  Pipeline& working_;     // trigger pipeline inside shadow_
  Uid pipeline_uid_;
  std::size_t boundary_;  // first mutable stage index (== cursor at snapshot)
  std::optional<TaskGraph> last_graph_;  // graph after the previous step
  std::vector<Mutation> staged_;
  std::set<AdaptationType> types_;
  std::vector<std::string> notes_;
  std::set<Uid> taken_uids_;  // filled alongside last_graph_
  int stage_counter_ = 0;
};

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

using ConditionFn = std::function<bool(const SignalContext&)>;
using BranchFn = std::function<void(const SignalContext&, AdaptableView&)>;

struct AdaptationPolicy {
  ConditionFn condition;  // null condition counts as true
  BranchFn on_true;       // either branch may be null (no-op)
  BranchFn on_false;
};

enum class Branch { None, True, False };

const char* to_string(Branch b);

struct HookOutcome {
  Branch branch = Branch::None;
  bool condition_value = false;
};

/// Runs condition then the matching branch against `view`. User exceptions
/// surface as AdaptationFailed.
HookOutcome evaluate_post_exec(const AdaptationPolicy& policy,
                               const SignalContext& ctx, AdaptableView& view);

/// Chains branch functions right to left: compose({f, g, h}) applies h, then
/// g, then f, matching nested call notation f(g(h(x))).
BranchFn compose_branches(std::vector<BranchFn> fns);

// ---------------------------------------------------------------------------
// Builtin conditions and branches (used by workflow files and benchmarks)
// ---------------------------------------------------------------------------

ConditionFn cond_always();
ConditionFn cond_never();

/// True for the first n evaluations of this policy instance. Counter state
/// lives in the closure, so a re-evaluated trigger counts again.
ConditionFn cond_max_count(int n);

/// True while the trigger pipeline has fewer than n stages. Pure function of
/// the snapshot, so re-evaluation after a crash gives the same answer.
ConditionFn cond_stage_count_below(int n);

/// Appends n_stages stages of tasks_per_stage tasks cloned from the template
/// (uids regenerated). inherit_hook copies the trigger stage's post_exec onto
/// the new stages so chains of additions keep firing.
BranchFn branch_add_stages(int n_stages, int tasks_per_stage,
                           TaskSpec task_template, bool inherit_hook);

/// Seeded shuffle of the future stages. Draws come from a stream owned by the
/// closure, so repeated invocations keep permuting deterministically.
BranchFn branch_shuffle_remaining(std::uint64_t seed);

/// Re-rolls cores for every task of the next future stage, uniform in
/// [1, max_cores - 1].
BranchFn branch_randomize_cores(std::uint64_t seed, int max_cores);

BranchFn branch_noop();

}  // namespace adaflow
