#include <doctest.h>

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "adaflow/adaptation.hpp"
#include "support/helpers.hpp"

using namespace adaflow;
using adaflow::testing::grid_pipeline;
using adaflow::testing::make_pipeline;
using adaflow::testing::make_stage;
using adaflow::testing::make_task;
using adaflow::testing::make_workflow;

namespace {

/// 3-stage pipeline with stage 0 finished and the cursor on stage 1.
Workflow mid_run_workflow() {
  Workflow wf = make_workflow({grid_pipeline("p", 3, 2)});
  Pipeline& p = wf.pipelines[0];
  p.state = RunState::SCHEDULED;
  p.stages[0].state = RunState::DONE;
  p.stages[1].state = RunState::DONE;  // trigger stage, just completed
  p.cursor = 2;
  return wf;
}

SignalContext make_ctx(const Workflow& wf, Uid source, Uid pipeline) {
  SignalContext ctx;
  ctx.source_uid = std::move(source);
  ctx.pipeline_uid = std::move(pipeline);
  ctx.workflow_view = std::make_shared<const Workflow>(wf);
  return ctx;
}

}  // namespace

// ---------------------------------------------------------------------------
// apply_mutation guards
// ---------------------------------------------------------------------------

TEST_CASE("append guards: terminal pipelines, bad stages, uid collisions") {
  Workflow wf = make_workflow({grid_pipeline("p", 2, 1)});

  Workflow dead = wf;
  dead.pipelines[0].state = RunState::DONE;
  CHECK_THROWS_AS(
      apply_mutation(dead, AppendStage{"p", make_stage("x", {make_task("y")})}),
      MutationGuardViolation);

  CHECK_THROWS_AS(apply_mutation(wf, AppendStage{"p", make_stage("x", {})}),
                  EngineError);

  Stage started = make_stage("x", {make_task("y")});
  started.state = RunState::SCHEDULED;
  CHECK_THROWS_AS(apply_mutation(wf, AppendStage{"p", started}),
                  MutationGuardViolation);

  CHECK_THROWS_AS(
      apply_mutation(wf, AppendStage{"p", make_stage("p.s0", {make_task("y")})}),
      EngineError);
  CHECK_THROWS_AS(
      apply_mutation(
          wf, AppendStage{"p", make_stage("x", {make_task("p.s1.t0")})}),
      EngineError);
  CHECK_THROWS_AS(
      apply_mutation(wf,
                     AppendStage{"ghost", make_stage("x", {make_task("y")})}),
      EngineError);
}

TEST_CASE("reorder guards: validity of the permutation and the touched range") {
  Workflow wf = mid_run_workflow();

  CHECK_THROWS_AS(apply_mutation(wf, ReorderFutureStages{"p", 9, {}}),
                  EngineError);
  CHECK_THROWS_AS(apply_mutation(wf, ReorderFutureStages{"p", 2, {0, 0}}),
                  EngineError);
  CHECK_THROWS_AS(apply_mutation(wf, ReorderFutureStages{"p", 2, {1, 1}}),
                  EngineError);

  // Range covering the finished stages: the guard fires before anything
  // moves.
  CHECK_THROWS_AS(apply_mutation(wf, ReorderFutureStages{"p", 0, {2, 1, 0}}),
                  MutationGuardViolation);

  // A clean future-only permutation of one stage is the identity and legal.
  apply_mutation(wf, ReorderFutureStages{"p", 2, {0}});
  CHECK(wf.pipelines[0].stages[2].uid == "p.s2");
}

TEST_CASE("reorder behind the cursor is rejected even for pending stages") {
  Workflow wf = make_workflow({grid_pipeline("p", 3, 1)});
  wf.pipelines[0].cursor = 1;  // stage 0 counted done, state not yet flushed
  CHECK_THROWS_AS(apply_mutation(wf, ReorderFutureStages{"p", 0, {2, 1, 0}}),
                  MutationGuardViolation);
  apply_mutation(wf, ReorderFutureStages{"p", 1, {1, 0}});
  CHECK(wf.pipelines[0].stages[1].uid == "p.s2");
}

TEST_CASE("core changes hit only pending stages and existing tasks") {
  Workflow wf = mid_run_workflow();
  CHECK_THROWS_AS(apply_mutation(wf, SetTaskCores{"p", "p.s0", "p.s0.t0", 2}),
                  MutationGuardViolation);
  CHECK_THROWS_AS(apply_mutation(wf, SetTaskCores{"p", "nope", "t", 2}),
                  EngineError);
  CHECK_THROWS_AS(apply_mutation(wf, SetTaskCores{"p", "p.s2", "nope", 2}),
                  EngineError);
  CHECK_THROWS_AS(apply_mutation(wf, SetTaskCores{"p", "p.s2", "p.s2.t0", 0}),
                  EngineError);
  apply_mutation(wf, SetTaskCores{"p", "p.s2", "p.s2.t0", 3});
  CHECK(wf.pipelines[0].stages[2].tasks[0].cores == 3);
}

// ---------------------------------------------------------------------------
// AdaptableView
// ---------------------------------------------------------------------------

TEST_CASE("the view stages mutations privately and classifies each step") {
  Workflow wf = mid_run_workflow();
  AdaptableView view(wf, "p");
  CHECK(view.boundary() == 2);
  CHECK(view.future_stages().size() == 1);

  Stage s;  // uids left blank: the view generates fresh ones
  s.tasks.push_back(make_task(""));
  s.tasks.push_back(make_task(""));
  const Stage& added = view.append_stage(std::move(s));
  CHECK(added.uid == "p.s3");
  CHECK(added.tasks[0].uid == "p.s3.t0");
  CHECK(added.tasks[1].uid == "p.s3.t1");

  CHECK(view.staged().size() == 1);
  CHECK(view.classified_types() ==
        std::set<AdaptationType>{AdaptationType::TASK_COUNT});
  CHECK(view.pipeline().stages.size() == 4);
  // The snapshot the view was built from is untouched.
  CHECK(wf.pipelines[0].stages.size() == 3);

  view.reorder_future_stages({1, 0});
  CHECK(view.pipeline().stages[2].uid == "p.s3");
  view.set_task_cores("p.s2", "p.s2.t0", 4);
  CHECK(view.staged().size() == 3);
  CHECK(view.classified_types() ==
        std::set<AdaptationType>{AdaptationType::TASK_COUNT,
                                 AdaptationType::TASK_ORDER,
                                 AdaptationType::TASK_PROPERTY});
}

TEST_CASE("generated stage uids dodge collisions with existing names") {
  // A pipeline that already owns the uid the counter would produce first.
  Workflow wf = make_workflow({make_pipeline(
      "p", {make_stage("p.s0", {make_task("p.s0.t0")}),
            make_stage("p.s1", {make_task("p.s1.t0")})})});
  AdaptableView view(wf, "p");
  Stage s;
  s.tasks.push_back(make_task(""));
  CHECK(view.append_stage(std::move(s)).uid == "p.s2");
  Stage s2;
  s2.tasks.push_back(make_task(""));
  CHECK(view.append_stage(std::move(s2)).uid == "p.s3");
}

TEST_CASE("view mutations on past stages carry the guard through") {
  Workflow wf = mid_run_workflow();
  AdaptableView view(wf, "p");
  CHECK_THROWS_AS(view.set_task_cores("p.s0", "p.s0.t0", 2),
                  MutationGuardViolation);
}

TEST_CASE("an identity reorder stages a mutation but classifies as nothing") {
  Workflow wf = make_workflow({grid_pipeline("p", 3, 1)});
  AdaptableView view(wf, "p");
  view.reorder_future_stages({0, 1, 2});
  CHECK(view.staged().size() == 1);
  CHECK(view.classified_types().empty());
}

// ---------------------------------------------------------------------------
// Hook evaluation
// ---------------------------------------------------------------------------

TEST_CASE("hooks run the branch their condition picks") {
  Workflow wf = make_workflow({grid_pipeline("p", 2, 1)});
  SignalContext ctx = make_ctx(wf, "p.s0", "p");

  int t = 0, f = 0;
  AdaptationPolicy policy;
  policy.condition = [](const SignalContext&) { return false; };
  policy.on_true = [&](const SignalContext&, AdaptableView&) { ++t; };
  policy.on_false = [&](const SignalContext&, AdaptableView&) { ++f; };

  AdaptableView view(wf, "p");
  HookOutcome out = evaluate_post_exec(policy, ctx, view);
  CHECK(out.branch == Branch::False);
  CHECK_FALSE(out.condition_value);
  CHECK(t == 0);
  CHECK(f == 1);

  // Null condition counts as true; a null branch is a recorded no-op.
  AdaptationPolicy bare;
  out = evaluate_post_exec(bare, ctx, view);
  CHECK(out.branch == Branch::None);
  CHECK(out.condition_value);
}

TEST_CASE("user exceptions surface as AdaptationFailed with the trigger uid") {
  Workflow wf = make_workflow({grid_pipeline("p", 2, 1)});
  SignalContext ctx = make_ctx(wf, "p.s0", "p");
  AdaptableView view(wf, "p");

  AdaptationPolicy bad_cond;
  bad_cond.condition = [](const SignalContext&) -> bool {
    throw std::runtime_error("boom");
  };
  try {
    evaluate_post_exec(bad_cond, ctx, view);
    FAIL("expected AdaptationFailed");
  } catch (const AdaptationFailed& e) {
    CHECK(e.trigger_uid == "p.s0");
    CHECK(std::string(e.what()).find("condition threw") != std::string::npos);
  }

  AdaptationPolicy bad_branch;
  bad_branch.on_true = [](const SignalContext&, AdaptableView&) {
    throw std::runtime_error("kaput");
  };
  CHECK_THROWS_AS(evaluate_post_exec(bad_branch, ctx, view), AdaptationFailed);

  // Guard violations keep their type so callers can tell them apart.
  AdaptationPolicy guard_trip;
  guard_trip.on_true = [](const SignalContext&, AdaptableView& v) {
    v.set_task_cores("p.s0", "p.s0.t0", 2);
  };
  Workflow mid = mid_run_workflow();
  AdaptableView busy(mid, "p");
  CHECK_THROWS_AS(evaluate_post_exec(guard_trip, ctx, busy),
                  MutationGuardViolation);
}

TEST_CASE("composition applies right to left like nested calls") {
  std::vector<int> order;
  auto tag = [&order](int n) {
    return BranchFn(
        [&order, n](const SignalContext&, AdaptableView&) { order.push_back(n); });
  };
  BranchFn composed = compose_branches({tag(1), tag(2), tag(3)});

  Workflow wf = make_workflow({grid_pipeline("p", 2, 1)});
  SignalContext ctx = make_ctx(wf, "p.s0", "p");
  AdaptableView view(wf, "p");
  composed(ctx, view);
  CHECK(order == std::vector<int>{3, 2, 1});
}

// ---------------------------------------------------------------------------
// Builtin conditions and branches
// ---------------------------------------------------------------------------

TEST_CASE("builtin conditions") {
  Workflow wf = make_workflow({grid_pipeline("p", 2, 1)});
  SignalContext ctx = make_ctx(wf, "p.s0", "p");

  CHECK(cond_always()(ctx));
  CHECK_FALSE(cond_never()(ctx));

  ConditionFn twice = cond_max_count(2);
  CHECK(twice(ctx));
  CHECK(twice(ctx));
  CHECK_FALSE(twice(ctx));

  CHECK(cond_stage_count_below(3)(ctx));
  CHECK_FALSE(cond_stage_count_below(2)(ctx));
}

TEST_CASE("stage growth clones the template and can inherit the trigger hook") {
  Workflow wf = make_workflow({grid_pipeline("p", 2, 1)});
  wf.pipelines[0].stages[1].post_exec = "grow";
  SignalContext ctx = make_ctx(wf, "p.s1", "p");

  TaskSpec tmpl = make_task("ignored", 0.5, 2);
  BranchFn grow = branch_add_stages(2, 3, tmpl, true);
  AdaptableView view(wf, "p");
  grow(ctx, view);

  REQUIRE(view.pipeline().stages.size() == 4);
  const Stage& s2 = view.pipeline().stages[2];
  CHECK(s2.tasks.size() == 3);
  CHECK(s2.tasks[0].cores == 2);
  CHECK(s2.tasks[0].duration_hint_s == 0.5);
  CHECK(s2.post_exec == std::optional<std::string>("grow"));
  CHECK(view.pipeline().stages[3].post_exec ==
        std::optional<std::string>("grow"));
  CHECK(view.classified_types() ==
        std::set<AdaptationType>{AdaptationType::TASK_COUNT});

  // Without inheritance the new stages carry no hook.
  AdaptableView plain(wf, "p");
  branch_add_stages(1, 1, tmpl, false)(ctx, plain);
  CHECK_FALSE(plain.pipeline().stages[2].post_exec.has_value());
}

TEST_CASE("seeded shuffle and core refresh stay deterministic per closure") {
  Workflow wf = make_workflow({grid_pipeline("p", 5, 2)});
  SignalContext ctx = make_ctx(wf, "p.s0", "p");

  auto run_shuffle = [&](std::uint64_t seed) {
    AdaptableView view(wf, "p");
    branch_shuffle_remaining(seed)(ctx, view);
    std::vector<Uid> order;
    for (const auto& s : view.pipeline().stages) order.push_back(s.uid);
    return order;
  };
  CHECK(run_shuffle(5) == run_shuffle(5));

  auto run_cores = [&](std::uint64_t seed) {
    AdaptableView view(wf, "p");
    branch_randomize_cores(seed, 8)(ctx, view);
    std::vector<int> cores;
    for (const auto& t : view.pipeline().stages[0].tasks)
      cores.push_back(t.cores);
    return cores;
  };
  auto cores = run_cores(9);
  CHECK(cores == run_cores(9));
  for (int c : cores) CHECK((c >= 1 && c < 8));

  // The core refresh touches only the next future stage.
  AdaptableView view(wf, "p");
  branch_randomize_cores(3, 4)(ctx, view);
  for (std::size_t i = 1; i < view.pipeline().stages.size(); ++i)
    for (const auto& t : view.pipeline().stages[i].tasks)
      CHECK(t.cores == 1);
}
