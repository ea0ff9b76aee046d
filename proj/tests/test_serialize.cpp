#include <doctest.h>

#include <nlohmann/json.hpp>

#include "adaflow/serialize.hpp"
#include "support/helpers.hpp"

using namespace adaflow;
using adaflow::testing::grid_pipeline;
using adaflow::testing::make_stage;
using adaflow::testing::make_task;
using adaflow::testing::make_workflow;
using nlohmann::json;

namespace {

Workflow ornate_workflow() {
  Workflow wf = make_workflow({grid_pipeline("p", 2, 2)}, "/data/shared");
  Pipeline& p = wf.pipelines[0];
  p.state = RunState::SCHEDULED;
  p.cursor = 1;
  p.post_exec = "wrap_up";
  p.stages[0].state = RunState::DONE;
  p.stages[0].post_exec = "next_round";
  TaskSpec& t = p.stages[0].tasks[0];
  t.executable = "kernel:sim";
  t.arguments = {"--n", "64"};
  t.cores = 3;
  t.placement = NodePlacement::multi_node;
  t.node_count = 2;
  t.duration_hint_s = 1.25;
  t.input_refs = {"m0/manifest.txt"};
  t.environment = {{"OMP_NUM_THREADS", "3"}};
  return wf;
}

}  // namespace

TEST_CASE("workflows survive a json round trip with every field intact") {
  Workflow wf = ornate_workflow();
  Workflow back = workflow_from_json_string(workflow_to_json_string(wf));
  CHECK(back == wf);

  // Default-valued fields are omitted from the wire form.
  json j = json::parse(workflow_to_json_string(wf));
  const json& plain_task = j["pipelines"][0]["stages"][1]["tasks"][0];
  CHECK_FALSE(plain_task.contains("arguments"));
  CHECK_FALSE(plain_task.contains("environment"));
  CHECK_FALSE(plain_task.contains("duration_s"));
  const json& rich_task = j["pipelines"][0]["stages"][0]["tasks"][0];
  CHECK(rich_task["duration_s"] == 1.25);
  CHECK(rich_task["inputs"][0] == "m0/manifest.txt");
  CHECK(rich_task["placement"] == "multi_node");
}

TEST_CASE("every mutation kind round-trips through json") {
  std::vector<Mutation> all{
      AppendStage{"p", make_stage("s", {make_task("s.t0", 0.5, 2)})},
      ReorderFutureStages{"p", 2, {1, 0, 2}},
      SetTaskCores{"p", "s", "t", 6},
  };
  for (const Mutation& m : all) {
    json j = m;
    Mutation back = j.get<Mutation>();
    REQUIRE(back.index() == m.index());
    json j2 = back;
    CHECK(j == j2);
  }
  CHECK(mutation_pipeline(all[0]) == "p");
}

TEST_CASE("deltas and task runtimes round-trip through json") {
  StateDelta d;
  d.tasks.push_back({"p/s/t", TaskState::FAILED, 2, 137, true});
  d.stages.push_back({"p", "s", RunState::DONE});
  d.pipelines.push_back({"p", RunState::SCHEDULED});
  d.cursors.push_back({"p", 3});
  d.handled_triggers = {"p.s#1"};
  json jd = d;
  StateDelta d2 = jd.get<StateDelta>();
  json jd2 = d2;
  CHECK(jd == jd2);

  SyncDelta s;
  s.base_version = 41;
  s.pipeline = "p";
  s.trigger_id = "p.s#2";
  s.mutations.push_back(SetTaskCores{"p", "s", "t", 2});
  s.classified_types = {AdaptationType::TASK_PROPERTY};
  json js = s;
  SyncDelta s2 = js.get<SyncDelta>();
  CHECK(s2.base_version == 41);
  CHECK(s2.trigger_id == "p.s#2");
  CHECK(s2.classified_types == s.classified_types);
  json js2 = s2;
  CHECK(js == js2);

  TaskRuntime rt{TaskState::DONE, 2, 0, false};
  json jr = rt;
  CHECK(jr.get<TaskRuntime>() == rt);
}

TEST_CASE("task graphs serialize with uid-resolved edges") {
  TaskGraph g = to_task_graph(make_workflow({grid_pipeline("p", 2, 2)}));
  json j = g;
  CHECK(j["vertices"].size() == 4);
  CHECK(j["vertices"]["p.s0.t0"]["cores"] == 1);
  REQUIRE(j["edges"].size() == 4);
  bool found = false;
  for (const auto& e : j["edges"])
    if (e[0] == "p.s0.t1" && e[1] == "p.s1.t0") found = true;
  CHECK(found);
}

TEST_CASE("malformed workflow json is rejected, not absorbed") {
  CHECK_THROWS(workflow_from_json_string("{not json"));
  CHECK_THROWS(workflow_from_json_string("{\"pipelines\": 3}"));
  CHECK_THROWS(workflow_from_json_string(
      "{\"pipelines\": [{\"uid\": \"p\"}]}"));  // stages missing
}
