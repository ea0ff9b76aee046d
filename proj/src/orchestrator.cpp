#include "adaflow/orchestrator.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "adaflow/bus.hpp"
#include "adaflow/serialize.hpp"

namespace adaflow {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace std::chrono_literals;

std::vector<std::string> split_entity_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = path.find('/', start);
    if (pos == std::string::npos) {
      parts.push_back(path.substr(start));
      return parts;
    }
    parts.push_back(path.substr(start, pos - start));
    start = pos + 1;
  }
}

namespace {

constexpr const char* kWpEvents = "wp.events";
constexpr const char* kEmTasks = "em.tasks";
constexpr const char* kStoreCommit = "store.commit";
constexpr const char* kStoreAck = "store.ack";
constexpr const char* kCtl = "ctl";
constexpr const char* kHeartbeat = "heartbeat";

constexpr auto kPollSlice = std::chrono::milliseconds(20);

// ---------------------------------------------------------------------------
// Shared process-wide runtime. Outlives component "crashes": a simulated
// component death only ends its consumer loop, the way a real workflow
// manager process would die while the pilot job and its tasks keep running.
// ---------------------------------------------------------------------------

struct LaunchRecord {
  std::shared_ptr<TaskHandle> handle;
  std::uint64_t pool = 0;
  std::thread worker;
  std::atomic<bool> finished{false};
};

struct SharedRuntime {
  explicit SharedRuntime(std::size_t hwm) : bus(hwm) {}

  MessageBus bus;
  Profiler profiler;
  GlobalGraphStore* store = nullptr;
  const RunConfig* cfg = nullptr;
  Executor* executor = nullptr;

  std::atomic<bool> stopping{false};
  std::atomic<bool> run_complete{false};
  std::atomic<int> stage_done_count{0};

  std::mutex abort_mu;
  std::optional<std::string> abort_reason;

  // Execution-manager state that survives manager restarts (running tasks do
  // not die with their manager).
  std::mutex em_mu;
  std::map<std::string, std::unique_ptr<LaunchRecord>> launches;  // path#attempt
  std::ofstream launch_log;

  void note_abort(const std::string& reason) {
    std::lock_guard<std::mutex> lock(abort_mu);
    if (!abort_reason) abort_reason = reason;
  }
};

std::string launch_key(const std::string& path, int attempt) {
  return path + "#" + std::to_string(attempt);
}

class Heartbeat {
 public:
  Heartbeat(SharedRuntime& rt, std::string component)
      : rt_(rt), component_(std::move(component)) {}

  void tick() {
    Nanos now = monotonic_now();
    Nanos interval =
        static_cast<Nanos>(rt_.cfg->heartbeat_interval_s * 1e9);
    if (now - last_ < interval) return;
    last_ = now;
    json j{{"component", component_}, {"seq", ++seq_}, {"t", now}};
    rt_.bus.publish(kHeartbeat, j.dump());
  }

 private:
  SharedRuntime& rt_;
  std::string component_;
  Nanos last_ = 0;
  std::uint64_t seq_ = 0;
};

// ---------------------------------------------------------------------------
// Store writer: the single mutator of the global graph store. Commands are
// deduplicated by correlation id so redelivered bus messages cannot
// double-apply.
// ---------------------------------------------------------------------------

class StoreWriterLoop {
 public:
  explicit StoreWriterLoop(SharedRuntime& rt) : rt_(rt) {}

  void start() {
    alive_ = true;
    thread_ = std::thread([this] { run(); });
  }

  void join_if_done() {
    if (thread_.joinable() && !alive_) thread_.join();
  }

  void join() {
    if (thread_.joinable()) thread_.join();
  }

  bool alive() const { return alive_; }

 private:
  void run() {
    Heartbeat hb(rt_, "store");
    while (!rt_.stopping) {
      hb.tick();
      auto msg = rt_.bus.consume(kStoreCommit, kPollSlice);
      if (!msg) continue;
      try {
        handle(*msg);
      } catch (const std::exception& e) {
        log_error(std::string("store writer: ") + e.what());
        rt_.note_abort(std::string("store_writer: ") + e.what());
        json fatal{{"type", "fatal"}, {"who", "store"}, {"what", e.what()}};
        rt_.bus.publish(kCtl, fatal.dump());
      }
      rt_.bus.ack(kStoreCommit, msg->id);
    }
    alive_ = false;
  }

  void handle(const Envelope& msg) {
    json j = json::parse(msg.payload);
    const std::string corr = j.at("corr").get<std::string>();
    if (auto cached = rt_.store->command_outcome(corr)) {
      rt_.bus.publish(kStoreAck, *cached);
      return;
    }
    json ack;
    ack["corr"] = corr;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "state") {
      StateDelta d = j.at("delta").get<StateDelta>();
      try {
        std::uint64_t v = rt_.store->commit_state(d);
        ack["ok"] = true;
        ack["version"] = v;
      } catch (const EngineError& e) {
        ack["ok"] = false;
        ack["reason"] = e.what();
        ack["version"] = rt_.store->version();
      }
    } else if (kind == "sync") {
      SyncDelta d = j.at("delta").get<SyncDelta>();
      SyncResult r = rt_.store->propose_adaptation(d);
      if (const Ack* a = std::get_if<Ack>(&r)) {
        ack["ok"] = true;
        ack["version"] = a->version;
      } else {
        ack["ok"] = false;
        ack["reason"] = std::get<Reject>(r).reason;
        ack["version"] = rt_.store->version();
      }
    } else {
      throw EngineError("unknown store command kind: " + kind);
    }
    std::string text = ack.dump();
    rt_.store->record_command_outcome(corr, text);
    rt_.bus.publish(kStoreAck, std::move(text));
  }

  SharedRuntime& rt_;
  std::thread thread_;
  std::atomic<bool> alive_{false};
};

// ---------------------------------------------------------------------------
// Execution manager: consumes launch orders, runs tasks on the executor, and
// reports lifecycle events. Launches are deduplicated on (path, attempt), so
// replayed orders after a processor restart are harmless.
// ---------------------------------------------------------------------------

class ExecutionManagerLoop {
 public:
  explicit ExecutionManagerLoop(SharedRuntime& rt) : rt_(rt) {}

  void start() {
    alive_ = true;
    thread_ = std::thread([this] { run(); });
  }

  void join() {
    if (thread_.joinable()) thread_.join();
  }

  bool alive() const { return alive_; }

  void join_workers() {
    std::lock_guard<std::mutex> lock(rt_.em_mu);
    for (auto& [key, rec] : rt_.launches)
      if (rec->worker.joinable()) rec->worker.join();
  }

 private:
  void run() {
    Heartbeat hb(rt_, "em");
    while (!rt_.stopping) {
      hb.tick();
      auto msg = rt_.bus.consume(kEmTasks, kPollSlice);
      if (!msg) continue;
      try {
        handle(*msg);
      } catch (const std::exception& e) {
        log_error(std::string("execution manager: ") + e.what());
        json fatal{{"type", "fatal"}, {"who", "em"}, {"what", e.what()}};
        rt_.bus.publish(kCtl, fatal.dump());
      }
      rt_.bus.ack(kEmTasks, msg->id);
    }
    alive_ = false;
  }

  void handle(const Envelope& msg) {
    json j = json::parse(msg.payload);
    const std::string type = j.at("type").get<std::string>();
    if (type == "launch") {
      launch(j);
    } else if (type == "kill_pool") {
      std::uint64_t pool = j.at("pool").get<std::uint64_t>();
      std::lock_guard<std::mutex> lock(rt_.em_mu);
      for (auto& [key, rec] : rt_.launches)
        if (rec->pool == pool && !rec->finished) rec->handle->kill();
    } else if (type == "kill_task") {
      const std::string path = j.at("path").get<std::string>();
      std::lock_guard<std::mutex> lock(rt_.em_mu);
      for (auto& [key, rec] : rt_.launches)
        if (key.rfind(path + "#", 0) == 0 && !rec->finished)
          rec->handle->kill();
    } else {
      throw EngineError("unknown task order type: " + type);
    }
  }

  void launch(const json& j) {
    const std::string path = j.at("path").get<std::string>();
    const int attempt = j.at("attempt").get<int>();
    const std::uint64_t pool = j.at("pool").get<std::uint64_t>();
    TaskSpec task = j.at("task").get<TaskSpec>();
    const std::string shared_dir = j.value("shared_data_dir", "");

    const std::string key = launch_key(path, attempt);
    {
      std::lock_guard<std::mutex> lock(rt_.em_mu);
      if (rt_.launches.count(key)) return;  // replayed order
      rt_.launches[key] = std::make_unique<LaunchRecord>();
    }

    rt_.profiler.record(path, EventKind::TASK_SUBMIT);
    {
      std::lock_guard<std::mutex> lock(rt_.em_mu);
      if (rt_.launch_log.is_open()) {
        rt_.launch_log << monotonic_now() << ',' << path << ',' << attempt
                       << '\n';
        rt_.launch_log.flush();
      }
    }

    LaunchRecord* rec;
    {
      std::lock_guard<std::mutex> lock(rt_.em_mu);
      rec = rt_.launches[key].get();
      rec->pool = pool;
    }
    rec->worker = std::thread([this, rec, path, attempt, pool,
                               task = std::move(task), shared_dir] {
      int code = 0;
      try {
        LaunchContext ctx{rt_.cfg->run_dir, shared_dir, attempt};
        rt_.profiler.record(path, EventKind::TASK_START);
        std::shared_ptr<TaskHandle> handle =
            rt_.executor->launch(task, ctx);
        {
          std::lock_guard<std::mutex> lock(rt_.em_mu);
          rec->handle = handle;
        }
        code = handle->await();
      } catch (const std::exception& e) {
        log_error("task " + path + " launch failed: " + e.what());
        code = 126;
      }
      rt_.profiler.record(path, EventKind::TASK_END);
      rec->finished = true;
      json update{{"type", "task_update"}, {"path", path},
                  {"attempt", attempt}, {"exit_code", code},
                  {"pool", pool}};
      rt_.bus.publish(kWpEvents, update.dump());
      if (rt_.cfg->duplicate_completion_for.count(path))
        rt_.bus.publish(kWpEvents, update.dump());
    });
  }

  SharedRuntime& rt_;
  std::thread thread_;
  std::atomic<bool> alive_{false};
};

// ---------------------------------------------------------------------------
// Workflow processor: owns the control flow. Single committer towards the
// store; keeps a local mirror that replays every acknowledged delta, so the
// mirror and the store see byte-identical history.
// ---------------------------------------------------------------------------

struct PipelineRt {
  bool adapting = false;
  int syncs = 0;  // committed adaptations (the hook's iteration counter)
};

struct JobInfo {
  Uid pipeline;
  std::string trigger_id;
  std::string policy;
  Uid source;
  std::thread thread;
  Nanos t_start = 0;
};

class WorkflowProcessorLoop {
 public:
  WorkflowProcessorLoop(SharedRuntime& rt, const PolicySet& policies,
                        ResourceRequest pool_req)
      : rt_(rt), policies_(policies), pool_req_(pool_req),
        crash_countdown_(rt.cfg->wp_crash_after_messages) {}

  ~WorkflowProcessorLoop() {
    for (auto& [id, job] : jobs_)
      if (job.thread.joinable()) job.thread.join();
  }

  void start() {
    alive_ = true;
    clean_exit_ = false;
    thread_ = std::thread([this] { run(); });
  }

  void join() {
    if (thread_.joinable()) thread_.join();
  }

  bool alive() const { return alive_; }
  bool clean_exit() const { return clean_exit_; }

  int pool_allocations() const { return static_cast<int>(pool_seq_); }

  std::vector<AdaptationRecord> records() {
    std::lock_guard<std::mutex> lock(records_mu_);
    return records_;
  }

  Workflow mirror() {
    std::lock_guard<std::mutex> lock(mirror_out_mu_);
    return mirror_out_;
  }

 private:
  // ---- lifecycle --------------------------------------------------------

  void run() {
    try {
      rebuild();
      loop();
    } catch (const AdaptationFailed& e) {
      // distinguished so callers can tell a hook failure from an
      // executor/resource one
      log_error(std::string("adaptation failed: ") + e.what());
      rt_.note_abort(std::string("adaptation_failed: ") + e.what());
      json fatal{{"type", "fatal"}, {"who", "wp"}, {"what", e.what()}};
      rt_.bus.publish(kCtl, fatal.dump());
      clean_exit_ = true;
    } catch (const std::exception& e) {
      log_error(std::string("workflow processor: ") + e.what());
      rt_.note_abort(std::string("workflow_processor: ") + e.what());
      json fatal{{"type", "fatal"}, {"who", "wp"}, {"what", e.what()}};
      rt_.bus.publish(kCtl, fatal.dump());
      clean_exit_ = true;  // fatal, not restartable
    }
    export_mirror();
    alive_ = false;
  }

  void rebuild() {
    // Drop acks addressed to a previous incarnation.
    rt_.bus.requeue_unacked(kStoreAck);
    while (auto stale = rt_.bus.consume(kStoreAck, 0ms))
      rt_.bus.ack(kStoreAck, stale->id);

    StoreSnapshot snap = rt_.store->snapshot();
    mir_ = *snap.workflow;
    tasks_ = snap.tasks;
    handled_ = snap.handled_triggers;
    last_version_ = snap.version;

    pipe_rt_.clear();
    for (const auto& p : mir_.pipelines) {
      PipelineRt prt;
      for (const auto& entry : rt_.store->log())
        if (const SyncDelta* d = std::get_if<SyncDelta>(&entry.delta))
          if (d->pipeline == p.uid) ++prt.syncs;
      pipe_rt_[p.uid] = prt;
    }
    // Adaptation jobs from a previous incarnation are still running; their
    // pipelines stay locked until the pending adapt_done arrives.
    for (const auto& [id, job] : jobs_)
      if (!handled_.count(job.trigger_id)) pipe_rt_[job.pipeline].adapting = true;

    if (pool_ && pool_->state() == PoolState::ACTIVE) {
      // Surviving pool: drop claims whose launch never reached the store
      // (death between placement and the SUBMITTED commit), so rescheduling
      // does not double-place.
      std::map<Uid, std::string> uid_to_path;
      for (const auto& [path, trt] : tasks_) {
        (void)trt;
        uid_to_path[split_entity_path(path)[2]] = path;
      }
      for (const Uid& uid : pool_->placed_tasks()) {
        auto it = uid_to_path.find(uid);
        TaskState st = it == uid_to_path.end() ? TaskState::CANCELED
                                               : tasks_.at(it->second).state;
        if (st != TaskState::SUBMITTED && st != TaskState::RUNNING)
          pool_->release(uid);
      }
    } else {
      pool_ = std::make_unique<ResourcePool>(pool_req_, ++pool_seq_);
      pool_->activate();
      // Launches recorded against a pool that no longer exists are lost;
      // void them, then requeue at the same attempt.
      std::vector<std::string> lost;
      for (const auto& [path, trt] : tasks_)
        if (trt.state == TaskState::SUBMITTED ||
            trt.state == TaskState::RUNNING)
          lost.push_back(path);
      if (!lost.empty()) {
        StateDelta cancel, requeue;
        for (const auto& path : lost) {
          const TaskRuntime& trt = tasks_.at(path);
          cancel.tasks.push_back(
              {path, TaskState::CANCELED, trt.attempts, 0, false});
          requeue.tasks.push_back(
              {path, TaskState::READY, trt.attempts, 0, false});
        }
        commit(cancel);
        commit(requeue);
      }
    }
    rebuilding_ = true;
    for (const auto& p : mir_.pipelines) drive(p.uid);
    rebuilding_ = false;
  }

  void loop() {
    Heartbeat hb(rt_, "wp");
    while (!rt_.stopping) {
      hb.tick();
      check_walltime();
      if (check_complete()) {
        clean_exit_ = true;
        json done{{"type", "run_complete"}};
        rt_.bus.publish(kCtl, done.dump());
        return;
      }
      auto msg = rt_.bus.consume(kWpEvents, kPollSlice);
      if (!msg) continue;
      handle(*msg);
      if (crash_countdown_ > 0 && --crash_countdown_ == 0) {
        log_warn("workflow processor: simulated crash (test hook)");
        return;  // dies without acking; supervisor requeues and restarts
      }
      rt_.bus.ack(kWpEvents, msg->id);
    }
  }

  void handle(const Envelope& msg) {
    json j = json::parse(msg.payload);
    const std::string type = j.at("type").get<std::string>();
    if (type == "task_update")
      on_task_update(j);
    else if (type == "adapt_done")
      on_adapt_done(j);
    else
      log_warn("workflow processor: unknown event type " + type);
  }

  // ---- store interaction ------------------------------------------------

  json send_command(const char* kind, const json& delta) {
    const std::string corr = "c" + std::to_string(++corr_seq_);
    json cmd{{"corr", corr}, {"kind", kind}, {"delta", delta}};
    const std::string text = cmd.dump();
    Heartbeat hb(rt_, "wp");
    for (int round = 0; round < 3; ++round) {
      rt_.bus.publish(kStoreCommit, text);
      Nanos deadline = monotonic_now() +
                       static_cast<Nanos>(rt_.cfg->ack_timeout_s * 1e9);
      while (monotonic_now() < deadline && !rt_.stopping) {
        hb.tick();
        auto msg = rt_.bus.consume(kStoreAck, std::chrono::milliseconds(50));
        if (!msg) continue;
        json ack = json::parse(msg->payload);
        rt_.bus.ack(kStoreAck, msg->id);
        if (ack.at("corr").get<std::string>() != corr) continue;  // stale
        return ack;
      }
      if (rt_.stopping) break;
      log_warn("workflow processor: ack timeout for " + corr + ", resending");
    }
    throw EngineError("store ack timeout for command " + corr);
  }

  /// Commits a state delta, mirrors it locally, returns the new version.
  std::uint64_t commit(const StateDelta& delta) {
    json ack = send_command("state", json(delta));
    if (!ack.at("ok").get<bool>())
      throw EngineError("state commit rejected: " +
                        ack.value("reason", std::string("unknown")));
    std::uint64_t v = ack.at("version").get<std::uint64_t>();
    apply_state_delta(mir_, tasks_, handled_, delta);
    last_version_ = v;
    return v;
  }

  // ---- pipeline driving -------------------------------------------------

  Pipeline& pipeline_ref(const Uid& uid) {
    Pipeline* p = mir_.find_pipeline(uid);
    if (!p) throw EngineError("mirror lost pipeline " + uid);
    return *p;
  }

  void drive(const Uid& pipeline_uid) {
    Pipeline& p = pipeline_ref(pipeline_uid);
    if (is_terminal(p.state) || pipe_rt_[p.uid].adapting) return;

    // An unevaluated hook of the newest finished stage blocks progress; this
    // covers both the normal flow and recovery from a death between the
    // stage's completion commit and its hook evaluation.
    if (p.cursor > 0) {
      const Stage& prev = p.stages[p.cursor - 1];
      if (prev.state == RunState::DONE && prev.post_exec &&
          !handled_.count(prev.uid)) {
        start_adaptation(p.uid, prev.uid, *prev.post_exec, prev.uid);
        return;
      }
    }

    if (p.cursor >= p.stages.size()) {
      on_pipeline_complete(p);
      return;
    }
    Stage& s = p.stages[p.cursor];
    if (s.state == RunState::PENDING) {
      begin_stage(p, s);
    } else if (s.state == RunState::SCHEDULED) {
      if (stage_tasks_terminal(p, s))
        finish_stage(p, s);
      else
        schedule_pass();
    }
  }

  void begin_stage(Pipeline& p, Stage& s) {
    StateDelta d;
    if (p.state == RunState::PENDING)
      d.pipelines.push_back({p.uid, RunState::SCHEDULED});
    d.stages.push_back({p.uid, s.uid, RunState::SCHEDULED});
    for (const auto& t : s.tasks) {
      const std::string path = entity_path(p.uid, s.uid, t.uid);
      const TaskRuntime& rt = tasks_.at(path);
      d.tasks.push_back({path, TaskState::READY, rt.attempts, 0, false});
    }
    commit(d);
    rt_.profiler.record(entity_path(p.uid, s.uid), EventKind::STAGE_START);
    schedule_pass();
  }

  bool stage_tasks_terminal(const Pipeline& p, const Stage& s) {
    for (const auto& t : s.tasks)
      if (!is_terminal(tasks_.at(entity_path(p.uid, s.uid, t.uid)).state))
        return false;
    return true;
  }

  void finish_stage(Pipeline& p, Stage& s) {
    bool failed = false;
    for (const auto& t : s.tasks) {
      const TaskRuntime& rt = tasks_.at(entity_path(p.uid, s.uid, t.uid));
      if (rt.state == TaskState::DONE) continue;
      if (rt.state == TaskState::FAILED && rt.ignored) continue;
      failed = true;
    }
    StateDelta d;
    d.stages.push_back(
        {p.uid, s.uid, failed ? RunState::FAILED : RunState::DONE});
    if (failed) {
      d.pipelines.push_back({p.uid, RunState::FAILED});
    } else {
      d.cursors.push_back({p.uid, p.cursor + 1});
    }
    commit(d);
    rt_.profiler.record(entity_path(p.uid, s.uid), EventKind::STAGE_END);

    if (!failed) {
      int count = ++rt_.stage_done_count;
      if (rt_.cfg->crash_after_stage > 0 &&
          count == rt_.cfg->crash_after_stage) {
        log_warn("workflow processor: hard exit after stage " + s.uid +
                 " (test hook)");
        std::_Exit(86);
      }
    }

    if (failed) {
      rt_.note_abort("stage " + s.uid + " failed");
      return;
    }
    drive(p.uid);  // fires the stage hook, if any, before new work
  }

  void on_pipeline_complete(Pipeline& p) {
    if (p.post_exec) {
      const std::string tid =
          p.uid + "#" + std::to_string(p.stages.size());
      if (!handled_.count(tid)) {
        start_adaptation(p.uid, tid, *p.post_exec, p.uid);
        return;
      }
      if (p.cursor < p.stages.size()) {  // hook appended more work
        drive(p.uid);
        return;
      }
    }
    StateDelta d;
    d.pipelines.push_back({p.uid, RunState::DONE});
    commit(d);
  }

  // ---- scheduling -------------------------------------------------------

  struct ReadyTask {
    std::string path;
    const TaskSpec* spec;
  };

  std::vector<ReadyTask> ready_tasks() {
    std::vector<ReadyTask> out;
    for (const auto& p : mir_.pipelines) {
      if (is_terminal(p.state) || pipe_rt_[p.uid].adapting) continue;
      if (p.cursor >= p.stages.size()) continue;
      const Stage& s = p.stages[p.cursor];
      if (s.state != RunState::SCHEDULED) continue;
      for (const auto& t : s.tasks) {
        std::string path = entity_path(p.uid, s.uid, t.uid);
        TaskState st = tasks_.at(path).state;
        if (st == TaskState::READY)
          out.push_back({std::move(path), &t});
        else if (rebuilding_ &&
                 (st == TaskState::SUBMITTED || st == TaskState::RUNNING))
          resend_launch(path, t, tasks_.at(path).attempts);
      }
    }
    return out;
  }

  void schedule_pass() {
    std::vector<ReadyTask> ready = ready_tasks();
    if (ready.empty()) return;
    StateDelta d;
    std::vector<const ReadyTask*> placed;
    std::vector<const ReadyTask*> rejected;
    for (const auto& rt : ready) {
      if (!pool_->can_ever_place(*rt.spec)) {
        rejected.push_back(&rt);
        continue;
      }
      if (pool_->try_place(*rt.spec)) {
        TaskRuntime& trt = tasks_.at(rt.path);
        d.tasks.push_back(
            {rt.path, TaskState::SUBMITTED, trt.attempts + 1, 0, false});
        placed.push_back(&rt);
      }
      // No room right now: stays READY, retried on the next release.
    }
    if (!d.tasks.empty()) commit(d);
    for (const ReadyTask* rt : placed)
      send_launch(rt->path, *rt->spec, tasks_.at(rt->path).attempts);
    for (const ReadyTask* rt : rejected) {
      log_error("task " + rt->path + " cannot fit pool shape (nodes=" +
                std::to_string(pool_req_.nodes) + ", cores_per_node=" +
                std::to_string(pool_req_.cores_per_node) + ")");
      fail_task_terminally(rt->path, 127);
    }
  }

  void send_launch(const std::string& path, const TaskSpec& spec,
                   int attempt) {
    json j{{"type", "launch"}, {"path", path}, {"attempt", attempt},
           {"pool", pool_->id()}, {"task", spec},
           {"shared_data_dir", mir_.shared_data_dir}};
    rt_.bus.publish(kEmTasks, j.dump());
  }

  void resend_launch(const std::string& path, const TaskSpec& spec,
                     int attempt) {
    // After a restart the manager may or may not know this launch; its
    // (path, attempt) dedup makes the resend safe.
    send_launch(path, spec, attempt);
  }

  /// Unschedulable or policy-exhausted task: mark FAILED without retry, then
  /// settle the stage.
  void fail_task_terminally(const std::string& path, int exit_code) {
    TaskRuntime& trt = tasks_.at(path);
    bool ignore = !rt_.cfg->retry.abort_on_exhaust;
    StateDelta d;
    d.tasks.push_back(
        {path, TaskState::FAILED, trt.attempts, exit_code, ignore});
    commit(d);
    settle_after_failure(path, ignore);
  }

  // ---- task events ------------------------------------------------------

  void on_task_update(const json& j) {
    const std::string path = j.at("path").get<std::string>();
    const int attempt = j.at("attempt").get<int>();
    const int exit_code = j.at("exit_code").get<int>();
    const std::uint64_t pool = j.at("pool").get<std::uint64_t>();

    auto it = tasks_.find(path);
    if (it == tasks_.end()) {
      log_warn("event for unknown task " + path);
      return;
    }
    TaskRuntime& trt = it->second;
    if (pool != pool_->id()) return;          // lost pool, already handled
    if (attempt < trt.attempts) return;       // superseded attempt
    if (attempt == trt.attempts && is_terminal(trt.state)) return;  // dup

    auto parts = split_entity_path(path);
    Pipeline& p = pipeline_ref(parts[0]);
    const Stage* s = p.find_stage(parts[1]);
    if (!s || is_terminal(s->state)) return;  // stage already settled

    pool_->release(parts[2]);

    if (exit_code == 0) {
      StateDelta d;
      d.tasks.push_back({path, TaskState::DONE, attempt, 0, false});
      commit(d);
      if (stage_tasks_terminal(p, *s))
        finish_stage(p, *p.find_stage(parts[1]));
      schedule_pass();
      return;
    }

    // Failure path.
    FailureAction action =
        handle_task_failure(rt_.cfg->retry, attempt);
    if (action == FailureAction::Resubmit) {
      StateDelta d;
      d.tasks.push_back({path, TaskState::FAILED, attempt, exit_code, false});
      commit(d);
      StateDelta requeue;
      requeue.tasks.push_back(
          {path, TaskState::READY, attempt, exit_code, false});
      commit(requeue);
      schedule_pass();
      return;
    }
    bool ignore = action == FailureAction::Ignore;
    StateDelta d;
    d.tasks.push_back({path, TaskState::FAILED, attempt, exit_code, ignore});
    commit(d);
    settle_after_failure(path, ignore);
  }

  void settle_after_failure(const std::string& path, bool ignored) {
    auto parts = split_entity_path(path);
    Pipeline& p = pipeline_ref(parts[0]);
    Stage* s = p.find_stage(parts[1]);
    if (!s || is_terminal(s->state)) return;
    if (ignored) {
      if (stage_tasks_terminal(p, *s)) finish_stage(p, *s);
      schedule_pass();
      return;
    }
    // Abort: cancel the stage's still-active tasks, settle stage + pipeline.
    StateDelta d;
    for (const auto& t : s->tasks) {
      std::string sibling = entity_path(p.uid, s->uid, t.uid);
      TaskRuntime& srt = tasks_.at(sibling);
      if (is_terminal(srt.state)) continue;
      if (srt.state == TaskState::SUBMITTED || srt.state == TaskState::RUNNING) {
        json kill{{"type", "kill_task"}, {"path", sibling}};
        rt_.bus.publish(kEmTasks, kill.dump());
        pool_->release(t.uid);
      }
      d.tasks.push_back({sibling, TaskState::CANCELED, srt.attempts, 0, false});
    }
    if (!d.tasks.empty()) commit(d);
    finish_stage(p, *s);
  }

  // ---- adaptation -------------------------------------------------------

  void start_adaptation(const Uid& pipeline_uid, const std::string& trigger_id,
                        const std::string& policy_name, const Uid& source_uid) {
    PipelineRt& prt = pipe_rt_[pipeline_uid];
    if (prt.syncs >= rt_.cfg->max_adaptations_per_pipeline)
      throw AdaptationFailed(trigger_id,
                             "adaptation limit reached for " + pipeline_uid);
    auto pit = policies_.find(policy_name);
    if (pit == policies_.end())
      throw AdaptationFailed(trigger_id, "unknown policy " + policy_name);

    prt.adapting = true;
    rt_.profiler.record(pipeline_uid, EventKind::ADAPT_START);

    auto ctx = std::make_shared<SignalContext>();
    ctx->source_uid = source_uid;
    ctx->pipeline_uid = pipeline_uid;
    ctx->workflow_view = std::make_shared<const Workflow>(mir_);
    ctx->shared_data_dir = mir_.shared_data_dir;
    ctx->iteration = prt.syncs;
    const Pipeline& p = pipeline_ref(pipeline_uid);
    const Stage* src_stage = p.find_stage(source_uid);
    if (!src_stage && p.cursor > 0) src_stage = &p.stages[p.cursor - 1];
    if (src_stage) {
      for (const auto& t : src_stage->tasks) {
        const TaskRuntime& trt =
            tasks_.at(entity_path(p.uid, src_stage->uid, t.uid));
        TaskResult res;
        res.exit_code = trt.exit_code;
        res.attempts = trt.attempts;
        std::string base = rt_.cfg->run_dir + "/tasks/" + t.uid + ".attempt" +
                           std::to_string(trt.attempts);
        if (fs::exists(base + ".out")) res.output_files.push_back(base + ".out");
        ctx->completed_task_results[t.uid] = std::move(res);
      }
    }

    const AdaptationPolicy* policy = &pit->second;
    std::uint64_t job_id = ++job_seq_;
    JobInfo info;
    info.pipeline = pipeline_uid;
    info.trigger_id = trigger_id;
    info.policy = policy_name;
    info.source = source_uid;
    info.t_start = monotonic_now();
    auto [jit, inserted] = jobs_.emplace(job_id, std::move(info));
    jit->second.thread = std::thread([this, job_id, ctx, policy,
                                      pipeline_uid, trigger_id] {
      json result{{"type", "adapt_done"}, {"job", job_id},
                  {"pipeline", pipeline_uid}, {"trigger", trigger_id}};
      try {
        AdaptableView view(*ctx->workflow_view, pipeline_uid);
        HookOutcome out = evaluate_post_exec(*policy, *ctx, view);
        result["branch"] = to_string(out.branch);
        result["condition"] = out.condition_value;
        result["mutations"] = view.staged();
        json types = json::array();
        for (AdaptationType t : view.classified_types())
          types.push_back(to_string(t));
        result["types"] = std::move(types);
        result["notes"] = view.classification_notes();
      } catch (const std::exception& e) {
        result["error"] = e.what();
      }
      rt_.bus.publish(kWpEvents, result.dump());
    });
  }

  void on_adapt_done(const json& j) {
    const std::uint64_t job_id = j.at("job").get<std::uint64_t>();
    const Uid pipeline_uid = j.at("pipeline").get<Uid>();
    const std::string trigger_id = j.at("trigger").get<std::string>();

    std::string policy_name;
    Nanos t_start = 0;
    auto jit = jobs_.find(job_id);
    if (jit != jobs_.end()) {
      if (jit->second.thread.joinable()) jit->second.thread.join();
      policy_name = jit->second.policy;
      t_start = jit->second.t_start;
      jobs_.erase(jit);
    }
    if (handled_.count(trigger_id)) return;  // settled by an earlier job

    rt_.profiler.record(pipeline_uid, EventKind::ADAPT_END);
    Nanos t_end = monotonic_now();

    if (j.contains("error")) {
      pipe_rt_[pipeline_uid].adapting = false;
      throw AdaptationFailed(trigger_id, j.at("error").get<std::string>());
    }

    AdaptationRecord rec;
    rec.pipeline = pipeline_uid;
    rec.trigger_id = trigger_id;
    rec.policy = policy_name;
    rec.branch = j.at("branch").get<std::string>() == "on_true"
                     ? Branch::True
                     : (j.at("branch").get<std::string>() == "on_false"
                            ? Branch::False
                            : Branch::None);
    rec.condition_value = j.at("condition").get<bool>();
    rec.adapt_start = t_start;
    rec.adapt_end = t_end;
    for (const auto& n : j.at("notes"))
      rec.notes.push_back(n.get<std::string>());

    std::vector<Mutation> mutations;
    for (const auto& m : j.at("mutations"))
      mutations.push_back(m.get<Mutation>());
    rec.mutation_count = mutations.size();

    SyncDelta delta;
    delta.pipeline = pipeline_uid;
    delta.trigger_id = trigger_id;
    delta.mutations = std::move(mutations);
    for (const auto& t : j.at("types")) {
      const std::string name = t.get<std::string>();
      AdaptationType at = name == "TASK_COUNT" ? AdaptationType::TASK_COUNT
                          : name == "TASK_ORDER"
                              ? AdaptationType::TASK_ORDER
                              : AdaptationType::TASK_PROPERTY;
      delta.classified_types.insert(at);
      rec.types.insert(at);
    }

    if (delta.mutations.empty()) {
      StateDelta noop;
      noop.handled_triggers.push_back(trigger_id);
      rec.committed_version = 0;
      commit(noop);
      finish_adaptation(pipeline_uid, std::move(rec));
      return;
    }

    rec.sync_start = monotonic_now();
    rt_.profiler.record(pipeline_uid, EventKind::SYNC_START);
    for (int attempt = 0; attempt < 2; ++attempt) {
      delta.base_version = last_version_;
      json ack = send_command("sync", json(delta));
      if (ack.at("ok").get<bool>()) {
        std::uint64_t v = ack.at("version").get<std::uint64_t>();
        apply_sync_delta(mir_, tasks_, handled_, delta);
        last_version_ = v;
        rt_.profiler.record(pipeline_uid, EventKind::SYNC_ACK);
        rec.sync_ack = monotonic_now();
        rec.committed_version = v;
        pipe_rt_[pipeline_uid].syncs++;
        finish_adaptation(pipeline_uid, std::move(rec));
        return;
      }
      const std::string reason = ack.value("reason", std::string("unknown"));
      if (reason == "version_mismatch" && attempt == 0) {
        // Single writer: our view can only be stale if an ack was lost.
        // Refresh from the store and retry once.
        last_version_ = ack.at("version").get<std::uint64_t>();
        log_warn("sync rejected (version_mismatch); retrying at version " +
                 std::to_string(last_version_));
        continue;
      }
      if (reason == "pipeline_terminal") {
        rt_.profiler.record(pipeline_uid, EventKind::SYNC_ACK);
        rec.sync_ack = monotonic_now();
        rec.notes.push_back("sync dropped: pipeline already terminal");
        finish_adaptation(pipeline_uid, std::move(rec));
        return;
      }
      throw AdaptationFailed(trigger_id, "sync rejected: " + reason);
    }
    throw AdaptationFailed(trigger_id, "sync rejected twice");
  }

  void finish_adaptation(const Uid& pipeline_uid, AdaptationRecord rec) {
    {
      std::lock_guard<std::mutex> lock(records_mu_);
      records_.push_back(std::move(rec));
    }
    pipe_rt_[pipeline_uid].adapting = false;
    drive(pipeline_uid);
    schedule_pass();
  }

  // ---- pool supervision -------------------------------------------------

  void check_walltime() {
    if (!pool_ || !pool_->walltime_expired()) return;
    log_warn("pool " + std::to_string(pool_->id()) +
             " hit its walltime; tasks on it are lost");
    std::uint64_t dead = pool_->id();
    pool_->fail();
    json kill{{"type", "kill_pool"}, {"pool", dead}};
    rt_.bus.publish(kEmTasks, kill.dump());

    // In-flight work on the dead pool is lost: cancel, then requeue.
    std::vector<std::string> lost;
    for (auto& [path, trt] : tasks_)
      if (trt.state == TaskState::SUBMITTED || trt.state == TaskState::RUNNING)
        lost.push_back(path);
    if (!lost.empty()) {
      StateDelta cancel;
      for (const auto& path : lost) {
        TaskRuntime& trt = tasks_.at(path);
        cancel.tasks.push_back(
            {path, TaskState::CANCELED, trt.attempts, 0, false});
      }
      commit(cancel);
    }

    if (static_cast<int>(pool_seq_) > rt_.cfg->max_pool_reallocations) {
      abort_run("pool walltime exhausted " + std::to_string(pool_seq_) +
                " allocations");
      return;
    }
    pool_ = std::make_unique<ResourcePool>(pool_req_, ++pool_seq_);
    pool_->activate();
    log_info("allocated replacement pool " + std::to_string(pool_->id()));

    if (!lost.empty()) {
      StateDelta requeue;
      for (const auto& path : lost) {
        TaskRuntime& trt = tasks_.at(path);
        requeue.tasks.push_back(
            {path, TaskState::READY, trt.attempts, 0, false});
      }
      commit(requeue);
    }
    schedule_pass();
  }

  void abort_run(const std::string& reason) {
    rt_.note_abort(reason);
    StateDelta d;
    for (const auto& p : mir_.pipelines) {
      if (is_terminal(p.state)) continue;
      d.pipelines.push_back({p.uid, RunState::FAILED});
      if (p.cursor < p.stages.size() &&
          p.stages[p.cursor].state == RunState::SCHEDULED)
        d.stages.push_back({p.uid, p.stages[p.cursor].uid, RunState::FAILED});
    }
    if (!d.pipelines.empty()) commit(d);
  }

  bool check_complete() {
    for (const auto& p : mir_.pipelines)
      if (!is_terminal(p.state)) return false;
    for (const auto& [id, job] : jobs_)
      if (job.thread.joinable()) return false;  // let stragglers land
    return true;
  }

  void export_mirror() {
    std::lock_guard<std::mutex> lock(mirror_out_mu_);
    mirror_out_ = mir_;
  }

  // ---- data -------------------------------------------------------------

  SharedRuntime& rt_;
  const PolicySet& policies_;
  ResourceRequest pool_req_;

  std::thread thread_;
  std::atomic<bool> alive_{false};
  std::atomic<bool> clean_exit_{false};

  Workflow mir_;
  std::map<std::string, TaskRuntime> tasks_;
  std::set<std::string> handled_;
  std::uint64_t last_version_ = 0;
  std::map<Uid, PipelineRt> pipe_rt_;
  bool rebuilding_ = false;

  std::unique_ptr<ResourcePool> pool_;
  std::uint64_t pool_seq_ = 0;

  std::uint64_t corr_seq_ = 0;
  std::uint64_t job_seq_ = 0;
  std::map<std::uint64_t, JobInfo> jobs_;

  int crash_countdown_ = 0;

  std::mutex records_mu_;
  std::vector<AdaptationRecord> records_;
  std::mutex mirror_out_mu_;
  Workflow mirror_out_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Supervisor
// ---------------------------------------------------------------------------

ExecutionSummary run_workflow(const Workflow& wf, const ResourceRequest& pool,
                              const PolicySet& policies,
                              const RunConfig& cfg) {
  if (cfg.run_dir.empty()) throw EngineError("run_dir is required");
  fs::create_directories(cfg.run_dir);
  if (!wf.shared_data_dir.empty())
    fs::create_directories(wf.shared_data_dir);

  const std::string journal_path = cfg.journal_path.empty()
                                       ? cfg.run_dir + "/journal.ndjson"
                                       : cfg.journal_path;

  std::unique_ptr<GlobalGraphStore> store;
  if (cfg.resume) {
    store = GlobalGraphStore::from_journal(journal_path);
  } else {
    ValidationReport report = validate_workflow(wf);
    if (!report.ok()) {
      std::string what = "workflow invalid:";
      for (const auto& v : report.violations)
        what += " [" + v.rule + " " + v.entity + "]";
      throw EngineError(what);
    }
    store = std::make_unique<GlobalGraphStore>(wf);
    if (cfg.checkpoint) store->attach_journal(journal_path);
  }

  // Policy names must resolve before anything launches.
  {
    StoreSnapshot snap = store->snapshot();
    for (const auto& p : snap.workflow->pipelines) {
      if (p.post_exec && !policies.count(*p.post_exec))
        throw EngineError("pipeline " + p.uid + " names unknown policy " +
                          *p.post_exec);
      for (const auto& s : p.stages)
        if (s.post_exec && !policies.count(*s.post_exec))
          throw EngineError("stage " + s.uid + " names unknown policy " +
                            *s.post_exec);
    }
  }

  SharedRuntime rt(cfg.bus_high_water_mark);
  rt.store = store.get();
  rt.cfg = &cfg;
  for (const char* q : {kWpEvents, kEmTasks, kStoreCommit, kStoreAck, kCtl,
                        kHeartbeat})
    rt.bus.declare_queue(q);
  rt.launch_log.open(cfg.run_dir + "/launches.log", std::ios::app);

  std::unique_ptr<Executor> executor;
  if (cfg.executor == ExecutorKind::mock)
    executor = std::make_unique<MockExecutor>(cfg.kernels,
                                              cfg.mock_default_duration_s);
  else
    executor = std::make_unique<LocalProcessExecutor>(cfg.kernels);
  if (cfg.fault_plan)
    executor = std::make_unique<FaultInjectingExecutor>(std::move(executor),
                                                        *cfg.fault_plan);
  rt.executor = executor.get();

  StoreWriterLoop store_writer(rt);
  ExecutionManagerLoop em(rt);
  WorkflowProcessorLoop wp(rt, policies, pool);

  store_writer.start();
  em.start();
  wp.start();

  int wp_restarts = 0;
  bool done = false;
  while (!done) {
    auto msg = rt.bus.consume(kCtl, std::chrono::milliseconds(50));
    if (msg) {
      json j = json::parse(msg->payload);
      rt.bus.ack(kCtl, msg->id);
      const std::string type = j.at("type").get<std::string>();
      if (type == "run_complete" || type == "fatal") done = true;
    }
    // Heartbeats only get drained here; liveness is read off the component
    // flags directly since everything shares the process.
    while (auto beat = rt.bus.consume(kHeartbeat, 0ms))
      rt.bus.ack(kHeartbeat, beat->id);

    // A processor that died without a clean exit is rebuilt from the store;
    // its unacked events go back on the queue first.
    if (!wp.alive() && !wp.clean_exit()) {
      wp.join();
      std::size_t requeued = rt.bus.requeue_unacked(kWpEvents);
      ++wp_restarts;
      log_warn("supervisor: workflow processor died; requeued " +
               std::to_string(requeued) + " events, restarting");
      wp.start();
    } else if (!wp.alive() && wp.clean_exit()) {
      done = true;
    }
  }

  rt.stopping = true;
  wp.join();
  em.join();
  store_writer.join();
  em.join_workers();

  StoreSnapshot snap = store->snapshot();
  ExecutionSummary summary;
  {
    std::lock_guard<std::mutex> lock(rt.abort_mu);
    summary.abort_reason = rt.abort_reason;
  }
  summary.pipeline_states.clear();
  bool all_done = true;
  for (const auto& p : snap.workflow->pipelines) {
    summary.pipeline_states[p.uid] = p.state;
    if (p.state != RunState::DONE) all_done = false;
  }
  summary.completed = all_done;
  summary.task_states = snap.tasks;
  summary.adaptations = wp.records();
  summary.wp_restarts = wp_restarts;
  summary.pool_allocations = wp.pool_allocations();
  summary.store_version = snap.version;
  for (const auto& entry : store->log())
    summary.log_versions.push_back(entry.version);
  summary.local_workflow = wp.mirror();
  summary.store_workflow = *snap.workflow;
  summary.handled_triggers = snap.handled_triggers;
  summary.events = rt.profiler.events();
  summary.metrics = compute_metrics(summary.events);
  if (!cfg.profile_csv.empty()) rt.profiler.write_csv(cfg.profile_csv);
  return summary;
}

}  // namespace adaflow
