#include "adaflow/workflow.hpp"

#include <set>

namespace adaflow {

const char* to_string(TaskState s) {
  switch (s) {
    case TaskState::PENDING: return "PENDING";
    case TaskState::READY: return "READY";
    case TaskState::SUBMITTED: return "SUBMITTED";
    case TaskState::RUNNING: return "RUNNING";
    case TaskState::DONE: return "DONE";
    case TaskState::FAILED: return "FAILED";
    case TaskState::CANCELED: return "CANCELED";
  }
  return "?";
}

const char* to_string(RunState s) {
  switch (s) {
    case RunState::PENDING: return "PENDING";
    case RunState::SCHEDULED: return "SCHEDULED";
    case RunState::DONE: return "DONE";
    case RunState::FAILED: return "FAILED";
  }
  return "?";
}

std::optional<TaskState> task_state_from_string(const std::string& s) {
  static const std::map<std::string, TaskState> table = {
      {"PENDING", TaskState::PENDING},     {"READY", TaskState::READY},
      {"SUBMITTED", TaskState::SUBMITTED}, {"RUNNING", TaskState::RUNNING},
      {"DONE", TaskState::DONE},           {"FAILED", TaskState::FAILED},
      {"CANCELED", TaskState::CANCELED},
  };
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::optional<RunState> run_state_from_string(const std::string& s) {
  static const std::map<std::string, RunState> table = {
      {"PENDING", RunState::PENDING},
      {"SCHEDULED", RunState::SCHEDULED},
      {"DONE", RunState::DONE},
      {"FAILED", RunState::FAILED},
  };
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

const Stage* Pipeline::find_stage(const Uid& uid) const {
  for (const auto& s : stages)
    if (s.uid == uid) return &s;
  return nullptr;
}

Stage* Pipeline::find_stage(const Uid& uid) {
  for (auto& s : stages)
    if (s.uid == uid) return &s;
  return nullptr;
}

const Pipeline* Workflow::find_pipeline(const Uid& uid) const {
  for (const auto& p : pipelines)
    if (p.uid == uid) return &p;
  return nullptr;
}

Pipeline* Workflow::find_pipeline(const Uid& uid) {
  for (auto& p : pipelines)
    if (p.uid == uid) return &p;
  return nullptr;
}

namespace {

bool uid_ok(const Uid& uid) {
  if (uid.empty()) return false;
  for (char c : uid)
    if (c == '/' || c == ',' || c == '\n' || c == '\0') return false;
  return true;
}

void check_uid(const Uid& uid, const std::string& where,
               std::set<Uid>& seen, ValidationReport& report) {
  if (!uid_ok(uid)) {
    report.violations.push_back(
        {"uid.invalid_chars", where,
         "uid must be non-empty and free of '/', ',' and control characters"});
    return;
  }
  if (!seen.insert(uid).second)
    report.violations.push_back(
        {"uid.duplicate", uid, "uid already used by another entity"});
}

}  // namespace

ValidationReport validate_workflow(const Workflow& wf) {
  ValidationReport report;
  if (wf.pipelines.empty()) {
    report.violations.push_back(
        {"workflow.empty", "<workflow>", "workflow has no pipelines"});
    return report;
  }
  std::set<Uid> seen;
  for (const auto& p : wf.pipelines) {
    check_uid(p.uid, "pipeline " + p.uid, seen, report);
    if (p.stages.empty())
      report.violations.push_back(
          {"pipeline.empty", p.uid, "pipeline has no stages"});
    for (const auto& s : p.stages) {
      check_uid(s.uid, "stage " + s.uid, seen, report);
      if (s.tasks.empty())
        report.violations.push_back(
            {"stage.empty", s.uid, "stage has no tasks"});
      for (const auto& t : s.tasks) {
        check_uid(t.uid, "task " + t.uid, seen, report);
        if (t.executable.empty())
          report.violations.push_back(
              {"task.no_executable", t.uid, "task has no executable"});
        if (t.cores < 1)
          report.violations.push_back(
              {"task.bad_cores", t.uid, "cores must be >= 1"});
        if (t.placement == NodePlacement::multi_node && t.node_count < 1)
          report.violations.push_back(
              {"task.bad_node_count", t.uid, "node_count must be >= 1"});
      }
    }
  }
  return report;
}

std::string entity_path(const Uid& pipeline, const Uid& stage) {
  return pipeline + "/" + stage;
}

std::string entity_path(const Uid& pipeline, const Uid& stage,
                        const Uid& task) {
  return pipeline + "/" + stage + "/" + task;
}

}  // namespace adaflow
