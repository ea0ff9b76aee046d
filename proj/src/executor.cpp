#include "adaflow/executor.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <thread>

namespace adaflow {

void KernelRegistry::add(const std::string& name, KernelFn fn) {
  kernels_[name] = std::move(fn);
}

const KernelFn* KernelRegistry::find(const std::string& name) const {
  auto it = kernels_.find(name);
  return it == kernels_.end() ? nullptr : &it->second;
}

std::optional<std::string> kernel_name(const std::string& executable) {
  constexpr const char* prefix = "kernel:";
  if (executable.rfind(prefix, 0) == 0) return executable.substr(7);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// MockExecutor
// ---------------------------------------------------------------------------

namespace {

class MockHandle : public TaskHandle {
 public:
  MockHandle(TaskSpec task, LaunchContext ctx,
             std::shared_ptr<const KernelRegistry> kernels,
             double default_duration_s)
      : task_(std::move(task)), ctx_(std::move(ctx)),
        kernels_(std::move(kernels)) {
    double duration = task_.duration_hint_s.value_or(default_duration_s);
    worker_ = std::thread([this, duration] { run(duration); });
  }

  ~MockHandle() override {
    kill();
    if (worker_.joinable()) worker_.join();
  }

  int await() override {
    std::unique_lock<std::mutex> lock(mu_);
    finished_.wait(lock, [this] { return done_; });
    return exit_code_;
  }

  void kill() override {
    std::lock_guard<std::mutex> lock(mu_);
    killed_ = true;
    wake_.notify_all();
  }

 private:
  void run(double duration) {
    {
      std::unique_lock<std::mutex> lock(mu_);
      if (duration > 0.0)
        wake_.wait_for(lock,
                       std::chrono::duration<double>(duration),
                       [this] { return killed_; });
      if (killed_) {
        exit_code_ = 128 + SIGKILL;
        done_ = true;
        finished_.notify_all();
        return;
      }
    }
    int code = 0;
    if (auto name = kernel_name(task_.executable)) {
      const KernelFn* fn = kernels_ ? kernels_->find(*name) : nullptr;
      if (!fn) {
        code = 127;
      } else {
        KernelInvocation inv{task_.arguments, task_.environment,
                             ctx_.shared_data_dir, ctx_.run_dir, task_.uid,
                             ctx_.attempt};
        try {
          code = (*fn)(inv);
        } catch (const std::exception& e) {
          log_warn("kernel " + *name + " threw: " + e.what());
          code = 70;  // EX_SOFTWARE
        }
      }
    }
    std::lock_guard<std::mutex> lock(mu_);
    exit_code_ = killed_ ? 128 + SIGKILL : code;
    done_ = true;
    finished_.notify_all();
  }

  TaskSpec task_;
  LaunchContext ctx_;
  std::shared_ptr<const KernelRegistry> kernels_;
  std::thread worker_;
  std::mutex mu_;
  std::condition_variable wake_, finished_;
  bool killed_ = false;
  bool done_ = false;
  int exit_code_ = -1;
};

}  // namespace

std::unique_ptr<TaskHandle> MockExecutor::launch(const TaskSpec& task,
                                                 const LaunchContext& ctx) {
  return std::make_unique<MockHandle>(task, ctx, kernels_,
                                      default_duration_s_);
}

// ---------------------------------------------------------------------------
// LocalProcessExecutor
// ---------------------------------------------------------------------------

namespace {

class ProcessHandle : public TaskHandle {
 public:
  ProcessHandle(const TaskSpec& task, const LaunchContext& ctx) {
    namespace fs = std::filesystem;
    fs::path log_dir = fs::path(ctx.run_dir) / "tasks";
    std::error_code ec;
    fs::create_directories(log_dir, ec);
    std::string base =
        (log_dir / (task.uid + ".attempt" + std::to_string(ctx.attempt)))
            .string();

    pid_ = fork();
    if (pid_ < 0) throw ExecutorFailure("fork failed: " +
                                        std::string(std::strerror(errno)));
    if (pid_ == 0) {
      int out = ::open((base + ".out").c_str(),
                       O_WRONLY | O_CREAT | O_TRUNC, 0644);
      int err = ::open((base + ".err").c_str(),
                       O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (out >= 0) ::dup2(out, STDOUT_FILENO);
      if (err >= 0) ::dup2(err, STDERR_FILENO);

      std::vector<std::string> argv_store;
      argv_store.push_back(task.executable);
      for (const auto& a : task.arguments) argv_store.push_back(a);
      std::vector<char*> argv;
      for (auto& s : argv_store) argv.push_back(s.data());
      argv.push_back(nullptr);

      for (const auto& [k, v] : task.environment)
        ::setenv(k.c_str(), v.c_str(), 1);
      ::setenv("ADAFLOW_SHARED_DATA", ctx.shared_data_dir.c_str(), 1);

      ::execvp(argv[0], argv.data());
      ::_exit(127);
    }
  }

  ~ProcessHandle() override {
    if (!reaped_) {
      kill();
      await();
    }
  }

  int await() override {
    std::lock_guard<std::mutex> lock(mu_);
    if (reaped_) return exit_code_;
    int status = 0;
    if (::waitpid(pid_, &status, 0) < 0)
      throw ExecutorFailure("waitpid failed for pid " + std::to_string(pid_));
    if (WIFEXITED(status))
      exit_code_ = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
      exit_code_ = 128 + WTERMSIG(status);
    else
      exit_code_ = 255;
    reaped_ = true;
    return exit_code_;
  }

  void kill() override {
    if (!reaped_) ::kill(pid_, SIGKILL);
  }

 private:
  pid_t pid_ = -1;
  std::mutex mu_;
  std::atomic<bool> reaped_{false};
  int exit_code_ = -1;
};

class CompletedHandle : public TaskHandle {
 public:
  explicit CompletedHandle(int code) : exit_code_(code) {}
  int await() override { return exit_code_; }
  void kill() override {}

 private:
  int exit_code_;
};

}  // namespace

std::unique_ptr<TaskHandle> LocalProcessExecutor::launch(
    const TaskSpec& task, const LaunchContext& ctx) {
  if (kernel_name(task.executable)) {
    // Kernels stay in-process even under the process executor; reuse the
    // mock path without an artificial sleep.
    MockExecutor inline_exec(kernels_, 0.0);
    TaskSpec t = task;
    if (!t.duration_hint_s) t.duration_hint_s = 0.0;
    return inline_exec.launch(t, ctx);
  }
  return std::make_unique<ProcessHandle>(task, ctx);
}

// ---------------------------------------------------------------------------
// FaultInjectingExecutor
// ---------------------------------------------------------------------------

std::unique_ptr<TaskHandle> FaultInjectingExecutor::launch(
    const TaskSpec& task, const LaunchContext& ctx) {
  if (plan_.targets(task.uid) && ctx.attempt <= plan_.fail_first_attempts) {
    log_debug("fault injection: failing " + task.uid + " attempt " +
              std::to_string(ctx.attempt));
    return std::make_unique<CompletedHandle>(plan_.exit_code);
  }
  return inner_->launch(task, ctx);
}

}  // namespace adaflow
