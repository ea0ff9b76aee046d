#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adaflow/workflow.hpp"

namespace adaflow {

struct LaunchContext {
  std::string run_dir;          // per-run scratch; task logs go under tasks/
  std::string shared_data_dir;  // cross-task data exchange
  int attempt = 1;              // 1-based launch counter
};

/// One running task. await() blocks until the task finishes and returns its
/// exit code (0 success; 128+signal for killed processes). kill() requests
/// termination; await() then returns promptly with a nonzero code.
class TaskHandle {
 public:
  virtual ~TaskHandle() = default;
  virtual int await() = 0;
  virtual void kill() = 0;
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual std::unique_ptr<TaskHandle> launch(const TaskSpec& task,
                                             const LaunchContext& ctx) = 0;
};

// ---------------------------------------------------------------------------
// Kernels: in-process task bodies, addressed as "kernel:<name>"
// ---------------------------------------------------------------------------

struct KernelInvocation {
  std::vector<std::string> args;
  std::map<std::string, std::string> env;
  std::string shared_data_dir;
  std::string run_dir;
  Uid task_uid;
  int attempt = 1;
};

using KernelFn = std::function<int(const KernelInvocation&)>;

class KernelRegistry {
 public:
  void add(const std::string& name, KernelFn fn);
  const KernelFn* find(const std::string& name) const;

 private:
  std::map<std::string, KernelFn> kernels_;
};

/// Splits "kernel:<name>" into the kernel name; nullopt for real executables.
std::optional<std::string> kernel_name(const std::string& executable);

// ---------------------------------------------------------------------------
// Implementations
// ---------------------------------------------------------------------------

/// Simulated executor. Tasks sleep for duration_hint_s (interruptible), then
/// run their kernel body if the executable names one. Real executables are
/// not launched; unknown work succeeds after the sleep.
class MockExecutor : public Executor {
 public:
  explicit MockExecutor(std::shared_ptr<const KernelRegistry> kernels = nullptr,
                        double default_duration_s = 0.0)
      : kernels_(std::move(kernels)), default_duration_s_(default_duration_s) {}

  std::unique_ptr<TaskHandle> launch(const TaskSpec& task,
                                     const LaunchContext& ctx) override;

 private:
  std::shared_ptr<const KernelRegistry> kernels_;
  double default_duration_s_;
};

/// Runs the task executable as a local child process; stdout/stderr land in
/// <run_dir>/tasks/<uid>.attempt<k>.{out,err}. "kernel:" executables are
/// still run in-process (kernels are engine code, not binaries).
class LocalProcessExecutor : public Executor {
 public:
  explicit LocalProcessExecutor(
      std::shared_ptr<const KernelRegistry> kernels = nullptr)
      : kernels_(std::move(kernels)) {}

  std::unique_ptr<TaskHandle> launch(const TaskSpec& task,
                                     const LaunchContext& ctx) override;

 private:
  std::shared_ptr<const KernelRegistry> kernels_;
};

/// Failure injection for recovery tests: targeted tasks fail their first
/// fail_first_attempts launches with exit_code, then pass through to the
/// inner executor.
struct FaultPlan {
  int fail_first_attempts = 0;
  std::set<Uid> target_uids;  // empty: every task is a target
  int exit_code = 1;

  bool targets(const Uid& uid) const {
    return target_uids.empty() || target_uids.count(uid) != 0;
  }
};

class FaultInjectingExecutor : public Executor {
 public:
  FaultInjectingExecutor(std::unique_ptr<Executor> inner, FaultPlan plan)
      : inner_(std::move(inner)), plan_(std::move(plan)) {}

  std::unique_ptr<TaskHandle> launch(const TaskSpec& task,
                                     const LaunchContext& ctx) override;

 private:
  std::unique_ptr<Executor> inner_;
  FaultPlan plan_;
};

}  // namespace adaflow
