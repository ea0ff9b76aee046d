#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adaflow/orchestrator.hpp"

namespace adaflow {

// Two ready-made adaptive applications built on the engine: an ensemble of
// independent simulate/analyze pipelines that each run until their running
// estimate converges, and a single pipeline that accumulates samples until a
// total-count threshold is met. Task bodies are registered as kernels; all
// cross-task data exchange is file-based under the workflow's shared data
// directory, with atomic renames so concurrent readers always see complete
// files.

/// Stop rule for an ensemble member: converged when the last `window`
/// consecutive running-estimate deltas all stay below `tolerance`.
struct ConvergenceCriterion {
  double tolerance = 0.01;
  int window = 3;
};

enum class AnalysisMode {
  local,   // a member analyzes only its own data
  global,  // a member analyzes a snapshot of every member's data
};

struct EnsembleParams {
  int n_members = 2;
  int iterations_max = 12;  // hard bound per member
  AnalysisMode mode = AnalysisMode::local;
  ConvergenceCriterion criterion;
  std::uint64_t seed = 1;
  int samples_per_iteration = 64;

  // Mock-executor durations. The stagger keeps members deliberately out of
  // phase so analyses overlap neighbors' running simulations.
  double sim_duration_base_s = 0.05;
  double sim_duration_stagger_s = 0.35;
  double analysis_duration_s = 0.02;
};

struct SamplingParams {
  int sims_per_iteration = 10;
  int samples_per_sim = 10;
  long threshold = 100;     // total samples to accumulate
  int iterations_max = 64;  // safety bound; hitting it aborts the run
  std::uint64_t seed = 1;
  double sim_duration_s = 0.0;
};

struct DriverBuild {
  Workflow workflow;
  PolicySet policies;
};

/// n_members pipelines, each starting with one simulate + analyze iteration.
/// The pipeline hook appends the next iteration (with a seeded order shuffle
/// and a core refresh on the upcoming stage) until the member's estimate
/// converges or iterations_max is reached.
DriverBuild build_ensemble_workflow(const EnsembleParams& p,
                                    const std::string& shared_data_dir);

/// One pipeline per run; every iteration is a stage of sims_per_iteration
/// sampling tasks plus a one-task aggregation stage. The hook appends
/// iterations while the cumulative sample count is below the threshold.
DriverBuild build_sampling_workflow(const SamplingParams& p,
                                    const std::string& shared_data_dir);

/// Registers the task bodies both builders reference ("kernel:..." names).
void register_driver_kernels(KernelRegistry& reg);

// ---------------------------------------------------------------------------
// File formats (shared with tests and external tooling)
// ---------------------------------------------------------------------------

/// Writes content to a temp file in the target directory, then renames over
/// `path`. Readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

/// Sample file: one decimal value per line.
std::vector<double> read_samples_file(const std::string& path);

/// Manifest: newline-separated sample file paths. Missing manifest reads as
/// empty (a member that has not produced data yet).
std::vector<std::string> read_manifest(const std::string& path);

struct EstimateRow {
  int iteration = 0;
  double estimate = 0.0;
  long n_samples = 0;
};

/// Estimates CSV: header `iteration,estimate,n_samples`, one row per
/// completed analysis.
std::vector<EstimateRow> read_estimates(const std::string& path);

bool estimates_converged(const std::vector<EstimateRow>& rows,
                         const ConvergenceCriterion& c);

/// Total samples across every sample file the sampling driver has written.
long count_sampling_samples(const std::string& data_dir);

std::string ensemble_member_dir(const std::string& shared_data_dir,
                                int member);

}  // namespace adaflow
