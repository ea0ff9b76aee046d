#include <doctest.h>

#include <vector>

#include "adaflow/resource_pool.hpp"
#include "support/helpers.hpp"

using namespace adaflow;
using adaflow::testing::make_task;

namespace {

ResourcePool active_pool(int nodes, int cores, double walltime_s = 3600.0) {
  ResourcePool pool({nodes, cores, walltime_s}, 1);
  pool.activate();
  return pool;
}

TaskSpec multi(Uid uid, int node_count) {
  TaskSpec t = make_task(std::move(uid));
  t.placement = NodePlacement::multi_node;
  t.node_count = node_count;
  return t;
}

}  // namespace

TEST_CASE("single-node placement is first-fit in node order") {
  ResourcePool pool = active_pool(2, 4);
  auto a = pool.try_place(make_task("a", 0.0, 3));
  REQUIRE(a);
  CHECK(a->node_cores == std::vector<std::pair<int, int>>{{0, 3}});

  auto b = pool.try_place(make_task("b", 0.0, 3));
  REQUIRE(b);
  CHECK(b->node_cores == std::vector<std::pair<int, int>>{{1, 3}});

  // One core left on each node; a 1-core task lands back on node 0.
  auto c = pool.try_place(make_task("c", 0.0, 1));
  REQUIRE(c);
  CHECK(c->node_cores == std::vector<std::pair<int, int>>{{0, 1}});

  CHECK(pool.free_cores() == 1);
  CHECK(pool.busy_cores() == 7);
  CHECK_FALSE(pool.try_place(make_task("d", 0.0, 2)).has_value());

  pool.release("a");
  CHECK(pool.free_cores() == 4);
  auto d = pool.try_place(make_task("d", 0.0, 2));
  REQUIRE(d);
  CHECK(d->node_cores == std::vector<std::pair<int, int>>{{0, 2}});
}

TEST_CASE("multi-node tasks take whole idle nodes or nothing") {
  ResourcePool pool = active_pool(3, 4);
  REQUIRE(pool.try_place(make_task("claim", 0.0, 1)));  // dirties node 0

  auto m = pool.try_place(multi("m", 2));
  REQUIRE(m);
  CHECK(m->node_cores ==
        std::vector<std::pair<int, int>>{{1, 4}, {2, 4}});
  CHECK(m->total_cores() == 8);

  // Node 0 has three free cores but is not whole, so nothing is left.
  CHECK_FALSE(pool.try_place(multi("m2", 1)).has_value());
  pool.release("claim");
  CHECK(pool.try_place(multi("m2", 1)).has_value());
}

TEST_CASE("shape limits separate deferral from outright rejection") {
  ResourcePool pool = active_pool(2, 4);
  CHECK(pool.can_ever_place(make_task("fits", 0.0, 4)));
  CHECK_FALSE(pool.can_ever_place(make_task("wide", 0.0, 5)));
  CHECK(pool.can_ever_place(multi("m", 2)));
  CHECK_FALSE(pool.can_ever_place(multi("m", 3)));

  std::vector<TaskSpec> ready{
      make_task("a", 0.0, 4),
      make_task("b", 0.0, 4),
      make_task("c", 0.0, 4),  // no room this pass
      make_task("x", 0.0, 9),  // never fits this pool
  };
  ScheduleOutcome out = schedule_ready_tasks(pool, ready);
  REQUIRE(out.assigned.size() == 2);
  CHECK(out.assigned[0].first == "a");
  CHECK(out.assigned[1].first == "b");
  CHECK(out.deferred == std::vector<Uid>{"c"});
  CHECK(out.rejected == std::vector<Uid>{"x"});
}

TEST_CASE("pool lifecycle gates placement and failure sweeps claims") {
  ResourcePool pool({1, 4, 3600.0}, 7);
  CHECK(pool.state() == PoolState::NEW);
  CHECK_FALSE(pool.try_place(make_task("early")).has_value());

  pool.activate();
  CHECK_THROWS_AS(pool.activate(), AllocationFailure);
  REQUIRE(pool.try_place(make_task("t", 0.0, 2)));
  CHECK_THROWS_AS(pool.try_place(make_task("t", 0.0, 1)), AllocationFailure);
  CHECK(pool.placed_tasks() == std::vector<Uid>{"t"});

  pool.fail();
  CHECK(pool.state() == PoolState::FAILED);
  CHECK(pool.free_cores() == 4);
  CHECK(pool.placed_tasks().empty());
  pool.release("t");  // claim already swept; harmless
}

TEST_CASE("walltime runs only while the pool is active") {
  ResourcePool pool({1, 1, 0.0}, 1);
  CHECK_FALSE(pool.walltime_expired());  // NEW pools have no clock
  CHECK(pool.remaining_walltime_s() == 0.0);
  pool.activate();
  CHECK(pool.walltime_expired());

  ResourcePool wide = active_pool(1, 1, 3600.0);
  CHECK_FALSE(wide.walltime_expired());
  CHECK(wide.remaining_walltime_s() > 3500.0);
}

TEST_CASE("failure policy: resubmit until retries run out, then the configured action") {
  RetryPolicy abort_policy{1, true};
  CHECK(handle_task_failure(abort_policy, 1) == FailureAction::Resubmit);
  CHECK(handle_task_failure(abort_policy, 2) == FailureAction::AbortStage);

  RetryPolicy tolerant{2, false};
  CHECK(handle_task_failure(tolerant, 1) == FailureAction::Resubmit);
  CHECK(handle_task_failure(tolerant, 2) == FailureAction::Resubmit);
  CHECK(handle_task_failure(tolerant, 3) == FailureAction::Ignore);
}
