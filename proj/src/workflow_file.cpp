#include "adaflow/workflow_file.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

namespace adaflow {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ParseError(where + ": " + what);
}

std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(where, "unknown key \"" + it.key() + "\"");
  }
}

const json& require(const json& obj, const std::string& where,
                    const char* key) {
  auto it = obj.find(key);
  if (it == obj.end())
    fail(where, "missing required key \"" + std::string(key) + "\"");
  return *it;
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where, "expected a string");
  return v.get<std::string>();
}

long as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<long>();
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where, "expected a boolean");
  return v.get<bool>();
}

long opt_int(const json& obj, const std::string& where, const char* key,
             long dflt) {
  auto it = obj.find(key);
  return it == obj.end() ? dflt : as_int(*it, where + "." + key);
}

double opt_number(const json& obj, const std::string& where, const char* key,
                  double dflt) {
  auto it = obj.find(key);
  return it == obj.end() ? dflt : as_number(*it, where + "." + key);
}

std::vector<std::string> string_list(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected a list of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_string(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

TaskSpec parse_task(const json& j, const std::string& where,
                    bool require_uid) {
  expect_object(j, where);
  check_keys(j, where,
             {"uid", "executable", "arguments", "cores", "placement",
              "node_count", "duration_s", "inputs", "environment"});
  TaskSpec t;
  if (require_uid || j.contains("uid"))
    t.uid = as_string(require(j, where, "uid"), where + ".uid");
  t.executable =
      as_string(require(j, where, "executable"), where + ".executable");
  if (j.contains("arguments"))
    t.arguments = string_list(j["arguments"], where + ".arguments");
  t.cores = static_cast<int>(opt_int(j, where, "cores", 1));
  if (j.contains("placement")) {
    const std::string p = as_string(j["placement"], where + ".placement");
    if (p == "single_node")
      t.placement = NodePlacement::single_node;
    else if (p == "multi_node")
      t.placement = NodePlacement::multi_node;
    else
      fail(where + ".placement", "expected \"single_node\" or \"multi_node\"");
  }
  t.node_count = static_cast<int>(opt_int(j, where, "node_count", 1));
  if (j.contains("duration_s"))
    t.duration_hint_s = as_number(j["duration_s"], where + ".duration_s");
  if (j.contains("inputs"))
    t.input_refs = string_list(j["inputs"], where + ".inputs");
  if (j.contains("environment")) {
    const json& env = j["environment"];
    expect_object(env, where + ".environment");
    for (auto it = env.begin(); it != env.end(); ++it)
      t.environment[it.key()] =
          as_string(it.value(), where + ".environment." + it.key());
  }
  return t;
}

Stage parse_stage(const json& j, const std::string& where) {
  expect_object(j, where);
  check_keys(j, where, {"uid", "tasks", "post_exec"});
  Stage s;
  s.uid = as_string(require(j, where, "uid"), where + ".uid");
  const json& tasks = require(j, where, "tasks");
  if (!tasks.is_array()) fail(where + ".tasks", "expected a list");
  for (std::size_t i = 0; i < tasks.size(); ++i)
    s.tasks.push_back(parse_task(
        tasks[i], where + ".tasks[" + std::to_string(i) + "]", true));
  if (j.contains("post_exec"))
    s.post_exec = as_string(j["post_exec"], where + ".post_exec");
  return s;
}

Pipeline parse_pipeline(const json& j, const std::string& where) {
  expect_object(j, where);
  check_keys(j, where, {"uid", "stages", "post_exec"});
  Pipeline p;
  p.uid = as_string(require(j, where, "uid"), where + ".uid");
  const json& stages = require(j, where, "stages");
  if (!stages.is_array()) fail(where + ".stages", "expected a list");
  for (std::size_t i = 0; i < stages.size(); ++i)
    p.stages.push_back(parse_stage(
        stages[i], where + ".stages[" + std::to_string(i) + "]"));
  if (j.contains("post_exec"))
    p.post_exec = as_string(j["post_exec"], where + ".post_exec");
  return p;
}

ConditionFn parse_condition(const json& j, const std::string& where) {
  expect_object(j, where);
  const std::string kind =
      as_string(require(j, where, "kind"), where + ".kind");
  if (kind == "always") {
    check_keys(j, where, {"kind"});
    return cond_always();
  }
  if (kind == "never") {
    check_keys(j, where, {"kind"});
    return cond_never();
  }
  if (kind == "max_count") {
    check_keys(j, where, {"kind", "n"});
    const long n = as_int(require(j, where, "n"), where + ".n");
    if (n < 0) fail(where + ".n", "must be >= 0");
    return cond_max_count(static_cast<int>(n));
  }
  if (kind == "stage_count_below") {
    check_keys(j, where, {"kind", "n"});
    const long n = as_int(require(j, where, "n"), where + ".n");
    if (n < 1) fail(where + ".n", "must be >= 1");
    return cond_stage_count_below(static_cast<int>(n));
  }
  fail(where + ".kind", "unknown condition \"" + kind + "\"");
}

BranchFn parse_op(const json& j, const std::string& where,
                  std::uint64_t default_seed) {
  expect_object(j, where);
  const std::string kind =
      as_string(require(j, where, "kind"), where + ".kind");
  if (kind == "add_stages") {
    check_keys(j, where,
               {"kind", "n_stages", "tasks_per_stage", "task_template",
                "inherit_hook"});
    const long n_stages = opt_int(j, where, "n_stages", 1);
    const long per =
        as_int(require(j, where, "tasks_per_stage"), where + ".tasks_per_stage");
    if (n_stages < 1) fail(where + ".n_stages", "must be >= 1");
    if (per < 1) fail(where + ".tasks_per_stage", "must be >= 1");
    TaskSpec tmpl = parse_task(require(j, where, "task_template"),
                               where + ".task_template", false);
    bool inherit = true;
    if (j.contains("inherit_hook"))
      inherit = as_bool(j["inherit_hook"], where + ".inherit_hook");
    return branch_add_stages(static_cast<int>(n_stages),
                             static_cast<int>(per), std::move(tmpl), inherit);
  }
  if (kind == "shuffle_remaining") {
    check_keys(j, where, {"kind", "seed"});
    const std::uint64_t seed = j.contains("seed")
        ? static_cast<std::uint64_t>(as_int(j["seed"], where + ".seed"))
        : default_seed;
    return branch_shuffle_remaining(seed);
  }
  if (kind == "randomize_cores") {
    check_keys(j, where, {"kind", "seed", "max_cores"});
    const long max_cores =
        as_int(require(j, where, "max_cores"), where + ".max_cores");
    if (max_cores < 2) fail(where + ".max_cores", "must be >= 2");
    const std::uint64_t seed = j.contains("seed")
        ? static_cast<std::uint64_t>(as_int(j["seed"], where + ".seed"))
        : default_seed;
    return branch_randomize_cores(seed, static_cast<int>(max_cores));
  }
  if (kind == "noop") {
    check_keys(j, where, {"kind"});
    return branch_noop();
  }
  fail(where + ".kind", "unknown operation \"" + kind + "\"");
}

/// Op lists read top to bottom: [a, b, c] applies a, then b, then c.
BranchFn parse_branch(const json& j, const std::string& where,
                      std::uint64_t doc_seed, const std::string& policy) {
  if (!j.is_array()) fail(where, "expected a list of operations");
  if (j.empty()) return nullptr;
  std::vector<BranchFn> fns;
  for (std::size_t i = 0; i < j.size(); ++i)
    fns.push_back(parse_op(
        j[i], where + "[" + std::to_string(i) + "]",
        derive_seed(doc_seed, fnv1a(policy), i)));
  std::reverse(fns.begin(), fns.end());
  return compose_branches(std::move(fns));
}

AdaptationPolicy parse_policy(const json& j, const std::string& where,
                              std::uint64_t doc_seed,
                              const std::string& name) {
  expect_object(j, where);
  check_keys(j, where, {"condition", "on_true", "on_false"});
  AdaptationPolicy p;
  if (j.contains("condition"))
    p.condition = parse_condition(j["condition"], where + ".condition");
  if (j.contains("on_true"))
    p.on_true = parse_branch(j["on_true"], where + ".on_true", doc_seed, name);
  if (j.contains("on_false"))
    p.on_false =
        parse_branch(j["on_false"], where + ".on_false", doc_seed, name);
  return p;
}

ResourceSection parse_resources(const json& j, const std::string& where) {
  expect_object(j, where);
  check_keys(j, where,
             {"nodes", "cores_per_node", "walltime_s", "executor", "retry"});
  ResourceSection r;
  r.request.nodes = static_cast<int>(opt_int(j, where, "nodes", 1));
  r.request.cores_per_node =
      static_cast<int>(opt_int(j, where, "cores_per_node", 4));
  r.request.walltime_s = opt_number(j, where, "walltime_s", 3600.0);
  if (r.request.nodes < 1) fail(where + ".nodes", "must be >= 1");
  if (r.request.cores_per_node < 1)
    fail(where + ".cores_per_node", "must be >= 1");
  if (r.request.walltime_s <= 0) fail(where + ".walltime_s", "must be > 0");
  if (j.contains("executor")) {
    const std::string e = as_string(j["executor"], where + ".executor");
    if (e == "mock")
      r.executor = ExecutorKind::mock;
    else if (e == "process")
      r.executor = ExecutorKind::process;
    else
      fail(where + ".executor", "expected \"mock\" or \"process\"");
  }
  if (j.contains("retry")) {
    const json& retry = j["retry"];
    expect_object(retry, where + ".retry");
    check_keys(retry, where + ".retry", {"max_retries", "abort_on_exhaust"});
    r.retry.max_retries = static_cast<int>(
        opt_int(retry, where + ".retry", "max_retries", r.retry.max_retries));
    if (r.retry.max_retries < 0)
      fail(where + ".retry.max_retries", "must be >= 0");
    if (retry.contains("abort_on_exhaust"))
      r.retry.abort_on_exhaust = as_bool(retry["abort_on_exhaust"],
                                         where + ".retry.abort_on_exhaust");
  }
  return r;
}

EnsembleParams parse_ensemble(const json& j, const std::string& where,
                              std::uint64_t doc_seed) {
  check_keys(j, where,
             {"kind", "n_members", "iterations_max", "mode", "tolerance",
              "window", "seed", "samples_per_iteration", "sim_duration_base_s",
              "sim_duration_stagger_s", "analysis_duration_s"});
  EnsembleParams p;
  p.n_members = static_cast<int>(opt_int(j, where, "n_members", p.n_members));
  p.iterations_max =
      static_cast<int>(opt_int(j, where, "iterations_max", p.iterations_max));
  if (j.contains("mode")) {
    const std::string m = as_string(j["mode"], where + ".mode");
    if (m == "local")
      p.mode = AnalysisMode::local;
    else if (m == "global")
      p.mode = AnalysisMode::global;
    else
      fail(where + ".mode", "expected \"local\" or \"global\"");
  }
  p.criterion.tolerance =
      opt_number(j, where, "tolerance", p.criterion.tolerance);
  p.criterion.window =
      static_cast<int>(opt_int(j, where, "window", p.criterion.window));
  p.seed = static_cast<std::uint64_t>(
      opt_int(j, where, "seed", static_cast<long>(doc_seed)));
  p.samples_per_iteration = static_cast<int>(
      opt_int(j, where, "samples_per_iteration", p.samples_per_iteration));
  p.sim_duration_base_s =
      opt_number(j, where, "sim_duration_base_s", p.sim_duration_base_s);
  p.sim_duration_stagger_s =
      opt_number(j, where, "sim_duration_stagger_s", p.sim_duration_stagger_s);
  p.analysis_duration_s =
      opt_number(j, where, "analysis_duration_s", p.analysis_duration_s);
  return p;
}

SamplingParams parse_sampling(const json& j, const std::string& where,
                              std::uint64_t doc_seed) {
  check_keys(j, where,
             {"kind", "sims_per_iteration", "samples_per_sim", "threshold",
              "iterations_max", "seed", "sim_duration_s"});
  SamplingParams p;
  p.sims_per_iteration = static_cast<int>(
      opt_int(j, where, "sims_per_iteration", p.sims_per_iteration));
  p.samples_per_sim =
      static_cast<int>(opt_int(j, where, "samples_per_sim", p.samples_per_sim));
  p.threshold = opt_int(j, where, "threshold", p.threshold);
  p.iterations_max =
      static_cast<int>(opt_int(j, where, "iterations_max", p.iterations_max));
  p.seed = static_cast<std::uint64_t>(
      opt_int(j, where, "seed", static_cast<long>(doc_seed)));
  p.sim_duration_s = opt_number(j, where, "sim_duration_s", p.sim_duration_s);
  return p;
}

}  // namespace

WorkflowFileDoc parse_workflow_file(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(e.what(), line, col);
  }
  expect_object(doc, "$");
  check_keys(doc, "$", {"seed", "resources", "driver", "pipelines",
                        "policies"});

  WorkflowFileDoc out;
  if (doc.contains("seed")) {
    const long s = as_int(doc["seed"], "$.seed");
    if (s < 0) fail("$.seed", "must be >= 0");
    out.seed = static_cast<std::uint64_t>(s);
  }
  if (doc.contains("resources"))
    out.resources = parse_resources(doc["resources"], "$.resources");

  if (doc.contains("driver")) {
    if (doc.contains("pipelines") || doc.contains("policies"))
      fail("$", "\"driver\" excludes explicit \"pipelines\"/\"policies\"");
    const json& d = doc["driver"];
    expect_object(d, "$.driver");
    const std::string kind =
        as_string(require(d, "$.driver", "kind"), "$.driver.kind");
    if (kind == "ensemble") {
      out.driver = DriverKind::ensemble;
      out.ensemble = parse_ensemble(d, "$.driver", out.seed);
    } else if (kind == "sampling") {
      out.driver = DriverKind::sampling;
      out.sampling = parse_sampling(d, "$.driver", out.seed);
    } else {
      fail("$.driver.kind", "expected \"ensemble\" or \"sampling\"");
    }
    return out;
  }

  const json& pipelines = require(doc, "$", "pipelines");
  if (!pipelines.is_array()) fail("$.pipelines", "expected a list");
  for (std::size_t i = 0; i < pipelines.size(); ++i)
    out.workflow.pipelines.push_back(parse_pipeline(
        pipelines[i], "$.pipelines[" + std::to_string(i) + "]"));

  if (doc.contains("policies")) {
    const json& pols = doc["policies"];
    expect_object(pols, "$.policies");
    for (auto it = pols.begin(); it != pols.end(); ++it)
      out.policies.emplace(
          it.key(), parse_policy(it.value(), "$.policies." + it.key(),
                                 out.seed, it.key()));
  }

  // every hook reference must resolve before the file is considered parsed
  for (std::size_t pi = 0; pi < out.workflow.pipelines.size(); ++pi) {
    const Pipeline& p = out.workflow.pipelines[pi];
    const std::string pw = "$.pipelines[" + std::to_string(pi) + "]";
    if (p.post_exec && !out.policies.count(*p.post_exec))
      fail(pw + ".post_exec", "unknown policy \"" + *p.post_exec + "\"");
    for (std::size_t si = 0; si < p.stages.size(); ++si) {
      const Stage& s = p.stages[si];
      if (s.post_exec && !out.policies.count(*s.post_exec))
        fail(pw + ".stages[" + std::to_string(si) + "].post_exec",
             "unknown policy \"" + *s.post_exec + "\"");
    }
  }
  return out;
}

WorkflowFileDoc load_workflow_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_workflow_file(buf.str());
}

MaterializedWorkflow materialize_workflow(const WorkflowFileDoc& doc,
                                          const std::string& shared_data_dir) {
  if (doc.driver) {
    DriverBuild b = *doc.driver == DriverKind::ensemble
                        ? build_ensemble_workflow(doc.ensemble,
                                                  shared_data_dir)
                        : build_sampling_workflow(doc.sampling,
                                                  shared_data_dir);
    return {std::move(b.workflow), std::move(b.policies)};
  }
  MaterializedWorkflow m{doc.workflow, doc.policies};
  if (m.workflow.shared_data_dir.empty())
    m.workflow.shared_data_dir = shared_data_dir;
  return m;
}

}  // namespace adaflow
