#include "adaflow/store.hpp"

#include <nlohmann/json.hpp>

#include "adaflow/serialize.hpp"

namespace adaflow {

using nlohmann::json;

namespace {

constexpr const char* kMagic = "adaflow-ckpt";
constexpr int kFormat = 1;

int state_rank(TaskState s) {
  switch (s) {
    case TaskState::PENDING: return 0;
    case TaskState::READY: return 1;
    case TaskState::SUBMITTED: return 2;
    case TaskState::RUNNING: return 3;
    case TaskState::DONE:
    case TaskState::FAILED:
    case TaskState::CANCELED: return 4;
  }
  return 0;
}

int run_rank(RunState s) {
  switch (s) {
    case RunState::PENDING: return 0;
    case RunState::SCHEDULED: return 1;
    case RunState::DONE:
    case RunState::FAILED: return 2;
  }
  return 0;
}

std::string checksum_line(const json& body) {
  return to_hex(fnv1a(body.dump()));
}

}  // namespace

void index_workflow_tasks(const Workflow& wf,
                          std::map<std::string, TaskRuntime>& tasks) {
  for (const auto& p : wf.pipelines)
    for (const auto& s : p.stages)
      for (const auto& t : s.tasks)
        tasks.emplace(entity_path(p.uid, s.uid, t.uid), TaskRuntime{});
}

void apply_state_delta(Workflow& wf, std::map<std::string, TaskRuntime>& tasks,
                       std::set<std::string>& handled, const StateDelta& d) {
  for (const auto& c : d.tasks) {
    auto it = tasks.find(c.path);
    if (it == tasks.end())
      throw EngineError("state delta names unknown task: " + c.path);
    TaskRuntime& rt = it->second;
    if (c.attempts < rt.attempts) continue;  // stale change, drop
    if (c.attempts == rt.attempts) {
      if (rt.state == TaskState::DONE && c.state != TaskState::DONE)
        throw EngineError("task " + c.path + " is DONE and immutable");
      bool supersede =
          (rt.state == TaskState::FAILED || rt.state == TaskState::CANCELED) &&
          c.state == TaskState::READY;  // requeue of a lost or failed attempt
      if (!supersede && state_rank(c.state) < state_rank(rt.state)) {
        if (is_terminal(rt.state)) continue;  // duplicate of an old event
        throw EngineError("backward task transition for " + c.path + ": " +
                          to_string(rt.state) + " -> " + to_string(c.state));
      }
    } else if (rt.state == TaskState::DONE) {
      throw EngineError("task " + c.path + " is DONE; no further attempts");
    }
    rt.state = c.state;
    rt.attempts = c.attempts;
    rt.exit_code = c.exit_code;
    rt.ignored = c.ignored;
  }
  for (const auto& c : d.stages) {
    Pipeline* p = wf.find_pipeline(c.pipeline);
    Stage* s = p ? p->find_stage(c.stage) : nullptr;
    if (!s) throw EngineError("state delta names unknown stage: " + c.stage);
    if (run_rank(c.state) < run_rank(s->state)) continue;  // stale
    if (is_terminal(s->state) && c.state != s->state)
      throw EngineError("stage " + c.stage + " is terminal and immutable");
    s->state = c.state;
  }
  for (const auto& c : d.pipelines) {
    Pipeline* p = wf.find_pipeline(c.pipeline);
    if (!p)
      throw EngineError("state delta names unknown pipeline: " + c.pipeline);
    if (run_rank(c.state) < run_rank(p->state)) continue;  // stale
    if (is_terminal(p->state) && c.state != p->state)
      throw EngineError("pipeline " + c.pipeline +
                        " is terminal and immutable");
    p->state = c.state;
  }
  for (const auto& c : d.cursors) {
    Pipeline* p = wf.find_pipeline(c.pipeline);
    if (!p)
      throw EngineError("cursor delta names unknown pipeline: " + c.pipeline);
    if (c.cursor < p->cursor)
      throw EngineError("cursor moved backwards for " + c.pipeline);
    if (c.cursor > p->stages.size())
      throw EngineError("cursor beyond stage list for " + c.pipeline);
    p->cursor = c.cursor;
  }
  for (const auto& t : d.handled_triggers) handled.insert(t);
}

void apply_sync_delta(Workflow& wf, std::map<std::string, TaskRuntime>& tasks,
                      std::set<std::string>& handled, const SyncDelta& d) {
  for (const Mutation& m : d.mutations) apply_mutation(wf, m);
  index_workflow_tasks(wf, tasks);
  if (!d.trigger_id.empty()) handled.insert(d.trigger_id);
}

GlobalGraphStore::GlobalGraphStore(Workflow initial)
    : workflow_(std::move(initial)) {
  index_workflow_tasks(workflow_, tasks_);
}

std::uint64_t GlobalGraphStore::version() const {
  std::lock_guard<std::mutex> lock(mu_);
  return version_;
}

StoreSnapshot GlobalGraphStore::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  StoreSnapshot s;
  s.workflow = std::make_shared<Workflow>(workflow_);
  s.tasks = tasks_;
  s.handled_triggers = handled_triggers_;
  s.version = version_;
  return s;
}

TaskRuntime GlobalGraphStore::task_runtime(const std::string& path) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = tasks_.find(path);
  if (it == tasks_.end()) throw EngineError("unknown task path: " + path);
  return it->second;
}

std::uint64_t GlobalGraphStore::commit_state(const StateDelta& delta) {
  std::lock_guard<std::mutex> lock(mu_);
  apply_state_delta(workflow_, tasks_, handled_triggers_, delta);
  ++version_;
  LogEntry entry{version_, delta};
  journal_append_locked(entry);
  log_.push_back(std::move(entry));
  return version_;
}

SyncResult GlobalGraphStore::propose_adaptation(const SyncDelta& delta) {
  std::lock_guard<std::mutex> lock(mu_);
  const Pipeline* p = workflow_.find_pipeline(delta.pipeline);
  if (!p) return Reject{"unknown_pipeline"};
  if (is_terminal(p->state)) return Reject{"pipeline_terminal"};
  if (delta.base_version != version_) return Reject{"version_mismatch"};
  apply_sync_delta(workflow_, tasks_, handled_triggers_, delta);
  ++version_;
  LogEntry entry{version_, delta};
  journal_append_locked(entry);
  log_.push_back(std::move(entry));
  return Ack{version_};
}

std::optional<std::string> GlobalGraphStore::command_outcome(
    const std::string& corr) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = command_outcomes_.find(corr);
  if (it == command_outcomes_.end()) return std::nullopt;
  return it->second;
}

void GlobalGraphStore::record_command_outcome(const std::string& corr,
                                              std::string outcome) {
  std::lock_guard<std::mutex> lock(mu_);
  command_outcomes_[corr] = std::move(outcome);
}

std::vector<GlobalGraphStore::LogEntry> GlobalGraphStore::log() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

// ---------------------------------------------------------------------------
// Journal
// ---------------------------------------------------------------------------

void GlobalGraphStore::journal_append_locked(const LogEntry& entry) {
  if (!journal_.is_open()) return;
  json body;
  body["v"] = entry.version;
  if (const StateDelta* d = std::get_if<StateDelta>(&entry.delta)) {
    body["kind"] = "state";
    body["delta"] = *d;
  } else {
    body["kind"] = "sync";
    body["delta"] = std::get<SyncDelta>(entry.delta);
  }
  body["crc"] = checksum_line(body);
  journal_ << body.dump() << '\n';
  journal_.flush();
  if (!journal_)
    throw CheckpointError("write_failed",
                          "journal append failed: " + journal_path_);
}

void GlobalGraphStore::attach_journal(const std::string& path) {
  std::lock_guard<std::mutex> lock(mu_);
  if (version_ != 0)
    throw CheckpointError("late_attach",
                          "journal must attach before the first commit");
  journal_.open(path, std::ios::trunc);
  if (!journal_)
    throw CheckpointError("open_failed", "cannot open journal: " + path);
  journal_path_ = path;
  json header;
  header["magic"] = kMagic;
  header["format"] = kFormat;
  header["workflow"] = workflow_;
  header["crc"] = checksum_line(header);
  journal_ << header.dump() << '\n';
  journal_.flush();
}

std::unique_ptr<GlobalGraphStore> GlobalGraphStore::from_journal(
    const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw CheckpointError("open_failed", "cannot open journal: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  in.close();
  if (lines.empty())
    throw CheckpointError("bad_header", "journal is empty: " + path);

  auto parse_checked = [](const std::string& text, bool* ok) -> json {
    *ok = false;
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("crc")) return {};
    json body = j;
    body.erase("crc");
    if (j["crc"] != checksum_line(body)) return {};
    *ok = true;
    return j;
  };

  bool ok = false;
  json header = parse_checked(lines[0], &ok);
  if (!ok || header.value("magic", "") != kMagic)
    throw CheckpointError("bad_header",
                          "journal header is damaged or foreign: " + path);
  if (header.value("format", 0) != kFormat)
    throw CheckpointError("bad_format", "unsupported journal format");

  auto store = std::make_unique<GlobalGraphStore>(
      header.at("workflow").get<Workflow>());

  std::size_t keep = lines.size();
  std::uint64_t expect = 1;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    json rec = parse_checked(lines[i], &ok);
    if (!ok) {
      if (i + 1 == lines.size()) {
        // Interrupted final append: drop it and resume from the prefix.
        keep = i;
        break;
      }
      throw CheckpointError("checksum_mismatch",
                            "journal record " + std::to_string(i) +
                                " is damaged mid-log");
    }
    std::uint64_t v = rec.at("v").get<std::uint64_t>();
    if (v != expect)
      throw CheckpointError("log_gap", "journal jumps from version " +
                                           std::to_string(expect - 1) +
                                           " to " + std::to_string(v));
    ++expect;
    const std::string kind = rec.at("kind").get<std::string>();
    std::lock_guard<std::mutex> lock(store->mu_);
    if (kind == "state") {
      StateDelta d = rec.at("delta").get<StateDelta>();
      apply_state_delta(store->workflow_, store->tasks_,
                        store->handled_triggers_, d);
      ++store->version_;
      store->log_.push_back({store->version_, std::move(d)});
    } else if (kind == "sync") {
      SyncDelta d = rec.at("delta").get<SyncDelta>();
      apply_sync_delta(store->workflow_, store->tasks_,
                       store->handled_triggers_, d);
      ++store->version_;
      store->log_.push_back({store->version_, std::move(d)});
    } else {
      throw CheckpointError("bad_record", "unknown journal record kind");
    }
  }

  // Rewrite the surviving prefix and reopen for appending. Rewriting (rather
  // than truncating in place) keeps this portable to plain ofstream.
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
      throw CheckpointError("open_failed", "cannot reopen journal: " + path);
    for (std::size_t i = 0; i < keep; ++i) out << lines[i] << '\n';
  }
  std::lock_guard<std::mutex> lock(store->mu_);
  store->journal_.open(path, std::ios::app);
  if (!store->journal_)
    throw CheckpointError("open_failed", "cannot reopen journal: " + path);
  store->journal_path_ = path;
  return store;
}

}  // namespace adaflow
