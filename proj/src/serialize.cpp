#include "adaflow/serialize.hpp"

#include <nlohmann/json.hpp>

namespace adaflow {

using nlohmann::json;

namespace {

const char* placement_name(NodePlacement p) {
  return p == NodePlacement::single_node ? "single_node" : "multi_node";
}

NodePlacement placement_from(const std::string& s) {
  if (s == "single_node") return NodePlacement::single_node;
  if (s == "multi_node") return NodePlacement::multi_node;
  throw EngineError("unknown placement: " + s);
}

}  // namespace

void to_json(json& j, const TaskSpec& t) {
  j = json{{"uid", t.uid},
           {"executable", t.executable},
           {"cores", t.cores},
           {"placement", placement_name(t.placement)},
           {"node_count", t.node_count}};
  if (!t.arguments.empty()) j["arguments"] = t.arguments;
  if (t.duration_hint_s) j["duration_s"] = *t.duration_hint_s;
  if (!t.input_refs.empty()) j["inputs"] = t.input_refs;
  if (!t.environment.empty()) j["environment"] = t.environment;
}

void from_json(const json& j, TaskSpec& t) {
  t = TaskSpec{};
  j.at("uid").get_to(t.uid);
  j.at("executable").get_to(t.executable);
  if (j.contains("arguments")) j.at("arguments").get_to(t.arguments);
  if (j.contains("cores")) j.at("cores").get_to(t.cores);
  if (j.contains("placement"))
    t.placement = placement_from(j.at("placement").get<std::string>());
  if (j.contains("node_count")) j.at("node_count").get_to(t.node_count);
  if (j.contains("duration_s"))
    t.duration_hint_s = j.at("duration_s").get<double>();
  if (j.contains("inputs")) j.at("inputs").get_to(t.input_refs);
  if (j.contains("environment")) j.at("environment").get_to(t.environment);
}

void to_json(json& j, const Stage& s) {
  j = json{{"uid", s.uid},
           {"state", to_string(s.state)},
           {"tasks", s.tasks}};
  if (s.post_exec) j["post_exec"] = *s.post_exec;
}

void from_json(const json& j, Stage& s) {
  s = Stage{};
  j.at("uid").get_to(s.uid);
  j.at("tasks").get_to(s.tasks);
  if (j.contains("state")) {
    auto st = run_state_from_string(j.at("state").get<std::string>());
    if (!st) throw EngineError("bad stage state in JSON");
    s.state = *st;
  }
  if (j.contains("post_exec")) s.post_exec = j.at("post_exec").get<std::string>();
}

void to_json(json& j, const Pipeline& p) {
  j = json{{"uid", p.uid},
           {"state", to_string(p.state)},
           {"cursor", p.cursor},
           {"stages", p.stages}};
  if (p.post_exec) j["post_exec"] = *p.post_exec;
}

void from_json(const json& j, Pipeline& p) {
  p = Pipeline{};
  j.at("uid").get_to(p.uid);
  j.at("stages").get_to(p.stages);
  if (j.contains("cursor")) j.at("cursor").get_to(p.cursor);
  if (j.contains("state")) {
    auto st = run_state_from_string(j.at("state").get<std::string>());
    if (!st) throw EngineError("bad pipeline state in JSON");
    p.state = *st;
  }
  if (j.contains("post_exec"))
    p.post_exec = j.at("post_exec").get<std::string>();
}

void to_json(json& j, const Workflow& w) {
  j = json{{"pipelines", w.pipelines}};
  if (!w.shared_data_dir.empty()) j["shared_data_dir"] = w.shared_data_dir;
}

void from_json(const json& j, Workflow& w) {
  w = Workflow{};
  j.at("pipelines").get_to(w.pipelines);
  if (j.contains("shared_data_dir"))
    j.at("shared_data_dir").get_to(w.shared_data_dir);
}

void to_json(json& j, const Mutation& m) {
  std::visit(
      [&j](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, AppendStage>) {
          j = json{{"op", "append_stage"},
                   {"pipeline", op.pipeline},
                   {"stage", op.stage}};
        } else if constexpr (std::is_same_v<T, ReorderFutureStages>) {
          j = json{{"op", "reorder_future_stages"},
                   {"pipeline", op.pipeline},
                   {"first_index", op.first_index},
                   {"permutation", op.permutation}};
        } else {
          j = json{{"op", "set_task_cores"},
                   {"pipeline", op.pipeline},
                   {"stage", op.stage},
                   {"task", op.task},
                   {"cores", op.cores}};
        }
      },
      m);
}

void from_json(const json& j, Mutation& m) {
  const std::string op = j.at("op").get<std::string>();
  if (op == "append_stage") {
    AppendStage a;
    j.at("pipeline").get_to(a.pipeline);
    j.at("stage").get_to(a.stage);
    m = std::move(a);
  } else if (op == "reorder_future_stages") {
    ReorderFutureStages r;
    j.at("pipeline").get_to(r.pipeline);
    j.at("first_index").get_to(r.first_index);
    j.at("permutation").get_to(r.permutation);
    m = std::move(r);
  } else if (op == "set_task_cores") {
    SetTaskCores s;
    j.at("pipeline").get_to(s.pipeline);
    j.at("stage").get_to(s.stage);
    j.at("task").get_to(s.task);
    j.at("cores").get_to(s.cores);
    m = std::move(s);
  } else {
    throw EngineError("unknown mutation op in JSON: " + op);
  }
}

void to_json(json& j, const TaskGraph& g) {
  json vertices = json::object();
  for (const auto& [uid, props] : g.vertices)
    vertices[uid] = json{{"executable", props.executable},
                         {"arguments", props.arguments},
                         {"cores", props.cores},
                         {"placement", placement_name(props.placement)},
                         {"node_count", props.node_count}};
  json edges = json::array();
  for (const auto& [from, to] : edge_uids(g))
    edges.push_back(json::array({from, to}));
  j = json{{"vertices", std::move(vertices)}, {"edges", std::move(edges)}};
}

void to_json(json& j, const StateDelta& d) {
  j = json::object();
  if (!d.tasks.empty()) {
    json arr = json::array();
    for (const auto& t : d.tasks)
      arr.push_back(json{{"path", t.path},
                         {"state", to_string(t.state)},
                         {"attempts", t.attempts},
                         {"exit_code", t.exit_code},
                         {"ignored", t.ignored}});
    j["tasks"] = std::move(arr);
  }
  if (!d.stages.empty()) {
    json arr = json::array();
    for (const auto& s : d.stages)
      arr.push_back(json{{"pipeline", s.pipeline},
                         {"stage", s.stage},
                         {"state", to_string(s.state)}});
    j["stages"] = std::move(arr);
  }
  if (!d.pipelines.empty()) {
    json arr = json::array();
    for (const auto& p : d.pipelines)
      arr.push_back(json{{"pipeline", p.pipeline},
                         {"state", to_string(p.state)}});
    j["pipelines"] = std::move(arr);
  }
  if (!d.cursors.empty()) {
    json arr = json::array();
    for (const auto& c : d.cursors)
      arr.push_back(json{{"pipeline", c.pipeline}, {"cursor", c.cursor}});
    j["cursors"] = std::move(arr);
  }
  if (!d.handled_triggers.empty()) j["handled_triggers"] = d.handled_triggers;
}

void from_json(const json& j, StateDelta& d) {
  d = StateDelta{};
  if (j.contains("tasks")) {
    for (const auto& e : j.at("tasks")) {
      TaskStateChange t;
      e.at("path").get_to(t.path);
      auto st = task_state_from_string(e.at("state").get<std::string>());
      if (!st) throw EngineError("bad task state in delta JSON");
      t.state = *st;
      e.at("attempts").get_to(t.attempts);
      e.at("exit_code").get_to(t.exit_code);
      e.at("ignored").get_to(t.ignored);
      d.tasks.push_back(std::move(t));
    }
  }
  if (j.contains("stages")) {
    for (const auto& e : j.at("stages")) {
      StageStateChange s;
      e.at("pipeline").get_to(s.pipeline);
      e.at("stage").get_to(s.stage);
      auto st = run_state_from_string(e.at("state").get<std::string>());
      if (!st) throw EngineError("bad stage state in delta JSON");
      s.state = *st;
      d.stages.push_back(std::move(s));
    }
  }
  if (j.contains("pipelines")) {
    for (const auto& e : j.at("pipelines")) {
      PipelineStateChange p;
      e.at("pipeline").get_to(p.pipeline);
      auto st = run_state_from_string(e.at("state").get<std::string>());
      if (!st) throw EngineError("bad pipeline state in delta JSON");
      p.state = *st;
      d.pipelines.push_back(std::move(p));
    }
  }
  if (j.contains("cursors")) {
    for (const auto& e : j.at("cursors")) {
      CursorChange c;
      e.at("pipeline").get_to(c.pipeline);
      e.at("cursor").get_to(c.cursor);
      d.cursors.push_back(std::move(c));
    }
  }
  if (j.contains("handled_triggers"))
    j.at("handled_triggers").get_to(d.handled_triggers);
}

void to_json(json& j, const SyncDelta& d) {
  json types = json::array();
  for (AdaptationType t : d.classified_types) types.push_back(to_string(t));
  j = json{{"base_version", d.base_version},
           {"pipeline", d.pipeline},
           {"trigger", d.trigger_id},
           {"mutations", d.mutations},
           {"types", std::move(types)}};
}

void from_json(const json& j, SyncDelta& d) {
  d = SyncDelta{};
  j.at("base_version").get_to(d.base_version);
  j.at("pipeline").get_to(d.pipeline);
  j.at("trigger").get_to(d.trigger_id);
  j.at("mutations").get_to(d.mutations);
  for (const auto& t : j.at("types")) {
    const std::string name = t.get<std::string>();
    if (name == "TASK_COUNT")
      d.classified_types.insert(AdaptationType::TASK_COUNT);
    else if (name == "TASK_ORDER")
      d.classified_types.insert(AdaptationType::TASK_ORDER);
    else if (name == "TASK_PROPERTY")
      d.classified_types.insert(AdaptationType::TASK_PROPERTY);
    else
      throw EngineError("unknown adaptation type in JSON: " + name);
  }
}

void to_json(json& j, const TaskRuntime& r) {
  j = json{{"state", to_string(r.state)},
           {"attempts", r.attempts},
           {"exit_code", r.exit_code},
           {"ignored", r.ignored}};
}

void from_json(const json& j, TaskRuntime& r) {
  r = TaskRuntime{};
  auto st = task_state_from_string(j.at("state").get<std::string>());
  if (!st) throw EngineError("bad task state in runtime JSON");
  r.state = *st;
  j.at("attempts").get_to(r.attempts);
  j.at("exit_code").get_to(r.exit_code);
  j.at("ignored").get_to(r.ignored);
}

std::string workflow_to_json_string(const Workflow& w) {
  json j = w;
  return j.dump();
}

Workflow workflow_from_json_string(const std::string& text) {
  return json::parse(text).get<Workflow>();
}

}  // namespace adaflow
