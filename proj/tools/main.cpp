#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "adaflow/experiments.hpp"
#include "adaflow/workflow_file.hpp"

namespace fs = std::filesystem;
using namespace adaflow;

namespace {

constexpr int kExitViolations = 2;
constexpr int kExitParse = 3;
constexpr int kExitAdaptation = 4;
constexpr int kExitExecution = 5;

void report_parse_error(const std::string& path, const ParseError& e) {
  if (e.line() > 0)
    std::cerr << path << ":" << e.line() << ":" << e.column() << ": "
              << e.what() << "\n";
  else
    std::cerr << path << ": " << e.what() << "\n";
}

std::string default_run_dir(const std::string& wf_path) {
  return (fs::path("runs") / fs::path(wf_path).stem()).string();
}

int cmd_validate(const std::string& path) {
  WorkflowFileDoc doc;
  MaterializedWorkflow m;
  try {
    doc = load_workflow_file(path);
    // the shared dir is a placeholder; validation never touches it
    m = materialize_workflow(doc, "shared");
  } catch (const ParseError& e) {
    report_parse_error(path, e);
    return kExitParse;
  } catch (const EngineError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kExitParse;
  }
  ValidationReport report = validate_workflow(m.workflow);
  if (!report.ok()) {
    for (const auto& v : report.violations)
      std::cerr << v.rule << ": " << v.entity << ": " << v.detail << "\n";
    return kExitViolations;
  }
  std::size_t tasks = 0;
  for (const auto& p : m.workflow.pipelines)
    for (const auto& s : p.stages) tasks += s.tasks.size();
  std::cout << path << ": ok (" << m.workflow.pipelines.size()
            << " pipelines, " << tasks << " tasks)\n";
  return 0;
}

void print_summary(const ExecutionSummary& s) {
  for (const auto& [uid, state] : s.pipeline_states)
    std::cout << "pipeline " << uid << ": " << to_string(state) << "\n";
  std::cout << "tasks: " << s.task_states.size()
            << "  adaptations: " << s.adaptations.size()
            << "  store version: " << s.store_version << "\n";
  std::cout << std::fixed << std::setprecision(3)
            << "adaptation overhead: " << s.metrics.adaptation_overhead_s
            << " s  task execution: "
            << s.metrics.total_task_execution_time_s() << " s\n";
  if (s.abort_reason) std::cout << "abort: " << *s.abort_reason << "\n";
}

int cmd_run(const std::string& wf_path, const std::string& profile,
            const std::string& run_dir_flag, bool resume,
            int crash_after_stage) {
  WorkflowFileDoc doc;
  MaterializedWorkflow m;
  const std::string run_dir =
      run_dir_flag.empty() ? default_run_dir(wf_path) : run_dir_flag;
  try {
    doc = load_workflow_file(wf_path);
    m = materialize_workflow(doc, (fs::path(run_dir) / "shared").string());
  } catch (const ParseError& e) {
    report_parse_error(wf_path, e);
    return kExitParse;
  } catch (const EngineError& e) {
    std::cerr << wf_path << ": " << e.what() << "\n";
    return kExitParse;
  }

  RunConfig cfg;
  cfg.run_dir = run_dir;
  cfg.profile_csv = profile;
  cfg.resume = resume;
  cfg.executor = doc.resources.executor;
  cfg.retry = doc.resources.retry;
  cfg.crash_after_stage = crash_after_stage;
  auto kernels = std::make_shared<KernelRegistry>();
  register_driver_kernels(*kernels);
  cfg.kernels = kernels;

  ExecutionSummary summary;
  try {
    summary = run_workflow(m.workflow, doc.resources.request, m.policies, cfg);
  } catch (const EngineError& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitExecution;
  }
  print_summary(summary);
  if (summary.completed) return 0;
  const std::string reason = summary.abort_reason.value_or("");
  return reason.rfind("adaptation_failed", 0) == 0 ? kExitAdaptation
                                                   : kExitExecution;
}

int cmd_bench(const std::string& experiment, double scale, int trials,
              std::uint64_t seed, const std::string& out,
              const std::string& work_dir) {
  auto id = experiment_from_string(experiment);
  if (!id) {
    std::cerr << "unknown experiment \"" << experiment
              << "\" (expected I, II, III, IV, or V)\n";
    return kExitViolations;
  }
  if (scale <= 0.0 || trials < 1) {
    std::cerr << "scale must be > 0 and trials >= 1\n";
    return kExitViolations;
  }
  ExperimentSpec spec;
  spec.id = *id;
  spec.scale = scale;
  spec.trials = trials;
  spec.seed = seed;

  std::vector<BenchRow> rows;
  try {
    rows = run_experiment(spec, work_dir);
  } catch (const EngineError& e) {
    std::cerr << "benchmark failed: " << e.what() << "\n";
    return kExitExecution;
  }
  if (!out.empty()) write_bench_csv(out, rows);

  std::map<std::string, std::vector<BenchRow>> by_config;
  for (const auto& r : rows) by_config[r.config].push_back(r);
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& [config, group] : by_config)
    std::cout << "experiment " << experiment << " config " << config << ": "
              << group.front().adaptations << " adaptations, mean overhead "
              << mean_overhead(group) << " s, task execution "
              << group.front().task_execution_time_s << " s\n";
  if (*id == ExperimentId::I || *id == ExperimentId::IV ||
      *id == ExperimentId::V)
    std::cout << "overhead slope: " << overhead_slope(rows)
              << " s per adaptation\n";
  if (!out.empty()) std::cout << "report written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive ensemble workflow engine"};
  app.require_subcommand(1);

  std::string wf_path, profile, run_dir, experiment, bench_out, bench_dir;
  bool resume = false;
  double scale = 0.0625;
  int trials = 3;
  int crash_after_stage = 0;
  std::uint64_t seed = 42;

  auto* validate = app.add_subcommand("validate", "check a workflow file");
  validate->add_option("--workflow", wf_path, "workflow file")->required();

  auto* run = app.add_subcommand("run", "execute a workflow file");
  run->add_option("--workflow", wf_path, "workflow file")->required();
  run->add_option("--profile", profile, "write the event trace CSV here");
  run->add_option("--run-dir", run_dir,
                  "scratch directory (default runs/<name>)");
  run->add_flag("--resume", resume, "resume from the journal in the run dir");
  run->add_option("--crash-after-stage", crash_after_stage,
                  "fault-injection hook: hard-exit after the Nth stage "
                  "completes");

  auto* bench = app.add_subcommand("bench", "run an overhead benchmark");
  bench->add_option("--experiment", experiment, "I, II, III, IV, or V")
      ->required();
  bench->add_option("--scale", scale, "duration/size multiplier");
  bench->add_option("--trials", trials, "trials per configuration");
  bench->add_option("--seed", seed, "base seed");
  bench->add_option("--out", bench_out, "report CSV path");
  bench->add_option("--work-dir", bench_dir,
                    "scratch directory (default runs/bench)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(wf_path);
    if (run->parsed())
      return cmd_run(wf_path, profile, run_dir, resume, crash_after_stage);
    if (bench->parsed())
      return cmd_bench(experiment, scale, trials, seed, bench_out,
                       bench_dir.empty() ? "runs/bench" : bench_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitExecution;
  }
  return 0;
}
