#pragma once

// Shared fixtures: throwaway directories, small workflow builders, and the
// seeded random workflows the graph property suites run against.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "adaflow/orchestrator.hpp"
#include "adaflow/workflow.hpp"

namespace adaflow::testing {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    auto base = std::filesystem::temp_directory_path() / "adaflow-tests";
    path_ = base / (std::to_string(::getpid()) + "." +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);  // best effort
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string sub(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline TaskSpec make_task(Uid uid, double duration_s = 0.0, int cores = 1) {
  TaskSpec t;
  t.uid = std::move(uid);
  t.executable = "sleeper";
  t.cores = cores;
  if (duration_s > 0.0) t.duration_hint_s = duration_s;
  return t;
}

inline Stage make_stage(Uid uid, std::vector<TaskSpec> tasks) {
  Stage s;
  s.uid = std::move(uid);
  s.tasks = std::move(tasks);
  return s;
}

inline Pipeline make_pipeline(Uid uid, std::vector<Stage> stages) {
  Pipeline p;
  p.uid = std::move(uid);
  p.stages = std::move(stages);
  return p;
}

inline Workflow make_workflow(std::vector<Pipeline> pipelines,
                              std::string shared_data_dir = {}) {
  Workflow wf;
  wf.pipelines = std::move(pipelines);
  wf.shared_data_dir = std::move(shared_data_dir);
  return wf;
}

/// `stages` stages of `tasks` tasks each, uids "<pid>.s<i>" and
/// "<pid>.s<i>.t<j>".
inline Pipeline grid_pipeline(const Uid& pid, int stages, int tasks,
                              double duration_s = 0.0) {
  Pipeline p;
  p.uid = pid;
  for (int i = 0; i < stages; ++i) {
    Stage s;
    s.uid = pid + ".s" + std::to_string(i);
    for (int j = 0; j < tasks; ++j)
      s.tasks.push_back(make_task(s.uid + ".t" + std::to_string(j),
                                  duration_s));
    p.stages.push_back(std::move(s));
  }
  return p;
}

/// One pipeline, 2-8 stages, 1-16 tasks per stage. Executables, cores, and
/// arguments vary so property comparisons have something to distinguish.
inline Workflow random_workflow(SeededRng& rng, const Uid& pid = "p") {
  Pipeline p;
  p.uid = pid;
  const int stages = static_cast<int>(2 + rng.next_below(7));
  for (int i = 0; i < stages; ++i) {
    Stage s;
    s.uid = pid + ".s" + std::to_string(i);
    const int tasks = static_cast<int>(1 + rng.next_below(16));
    for (int j = 0; j < tasks; ++j) {
      TaskSpec t = make_task(s.uid + ".t" + std::to_string(j));
      t.executable = rng.next_below(2) ? "kernel:work" : "solver";
      t.cores = static_cast<int>(1 + rng.next_below(4));
      if (rng.next_below(3) == 0)
        t.arguments = {"--level", std::to_string(rng.next_below(10))};
      s.tasks.push_back(std::move(t));
    }
    p.stages.push_back(std::move(s));
  }
  return make_workflow({std::move(p)});
}

/// Mock-executor config without checkpointing; the fast default for tests
/// that do not exercise the journal.
inline RunConfig quick_config(const std::string& run_dir) {
  RunConfig cfg;
  cfg.run_dir = run_dir;
  cfg.checkpoint = false;
  return cfg;
}

}  // namespace adaflow::testing
