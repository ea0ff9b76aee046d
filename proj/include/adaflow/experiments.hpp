#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adaflow/orchestrator.hpp"

namespace adaflow {

// Overhead benchmark suite. Five experiments stress one adaptation kind each
// and measure adaptation overhead against task execution time on the mock
// executor:
//
//   I    growth: each stage completion appends one 16-task stage; the
//        adaptation count is the variable (4, 8, 16)
//   II   growth with the per-adaptation task count as the variable
//        (16, 64, 256 at the default scale), 2 adaptations
//   III  growth by stage-indexed task counts (64 * 2^s at the default
//        scale), single- vs multi-node tasks as the variable
//   IV   reordering: fixed-depth pipelines (5, 9, 17 stages) whose future
//        stages are shuffled at every stage completion
//   V    property: same shapes, the upcoming stage's core counts re-rolled
//        below 16 at every stage completion
//
// The scale factor multiplies kernel durations and per-adaptation task
// counts; the canonical desk scale 0.0625 gives 2 s / 5 s kernels. Stage
// depth sets are fixed.

enum class ExperimentId { I, II, III, IV, V };

std::optional<ExperimentId> experiment_from_string(const std::string& s);
const char* to_string(ExperimentId id);

struct ExperimentSpec {
  ExperimentId id = ExperimentId::I;
  double scale = 0.0625;
  int trials = 3;
  std::uint64_t seed = 42;
  std::string only_config;  // run just this configuration (empty: all)
};

struct BenchRow {
  std::string experiment;
  std::string config;       // the experiment variable's value
  int trial = 0;
  int adaptations = 0;      // hook evaluations that selected a branch
  long tasks_added = 0;     // tasks the adaptations introduced
  std::string task_type;    // "single" | "multi"
  double adaptation_overhead_s = 0.0;
  double task_execution_time_s = 0.0;
  std::uint64_t seed = 0;
};

/// Runs every (config, trial) pair of the experiment under work_dir.
/// Throws EngineError if any run fails to complete.
std::vector<BenchRow> run_experiment(const ExperimentSpec& spec,
                                     const std::string& work_dir);

void write_bench_csv(const std::string& path,
                     const std::vector<BenchRow>& rows);

/// Least-squares slope of overhead versus adaptation count; the growth
/// experiments expect it to be positive (cost per adaptation).
double overhead_slope(const std::vector<BenchRow>& rows);

/// Mean adaptation overhead across rows (used for cross-experiment cost
/// comparisons at equal adaptation counts).
double mean_overhead(const std::vector<BenchRow>& rows);

}  // namespace adaflow
