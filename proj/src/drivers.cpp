#include "adaflow/drivers.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace adaflow {

namespace fs = std::filesystem;

namespace {

// Drifting sample model: iteration means decay geometrically toward zero, so
// a member's running estimate settles after a handful of iterations while
// early deltas stay clearly above typical tolerances.
constexpr double kDriftScale = 0.5;
constexpr double kDriftDecay = 0.3;
constexpr double kNoiseHalfWidth = 0.1;

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<double> drifting_samples(std::uint64_t stream_seed, int iteration,
                                     int count) {
  SeededRng rng(stream_seed);
  const double mu = kDriftScale * std::pow(kDriftDecay, iteration);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(mu + (rng.next_unit() * 2.0 - 1.0) * kNoiseHalfWidth);
  return out;
}

std::string samples_to_text(const std::vector<double>& samples) {
  std::string text;
  for (double v : samples) {
    text += format_double(v);
    text += '\n';
  }
  return text;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

/// Replaces any previous row for the same iteration (task retries rewrite
/// rather than duplicate), keeps rows sorted, writes atomically.
void upsert_estimate(const std::string& path, const EstimateRow& row) {
  std::vector<EstimateRow> rows = read_estimates(path);
  rows.erase(std::remove_if(rows.begin(), rows.end(),
                            [&](const EstimateRow& r) {
                              return r.iteration == row.iteration;
                            }),
             rows.end());
  rows.push_back(row);
  std::sort(rows.begin(), rows.end(),
            [](const EstimateRow& a, const EstimateRow& b) {
              return a.iteration < b.iteration;
            });
  std::string text = "iteration,estimate,n_samples\n";
  for (const auto& r : rows)
    text += std::to_string(r.iteration) + "," + format_double(r.estimate) +
            "," + std::to_string(r.n_samples) + "\n";
  write_file_atomic(path, text);
}

// ---- kernels --------------------------------------------------------------

int kernel_ens_sim(const KernelInvocation& inv) {
  const int member = std::stoi(inv.args.at(0));
  const int iteration = std::stoi(inv.args.at(1));
  const int count = std::stoi(inv.args.at(2));
  const std::uint64_t seed = std::stoull(inv.args.at(3));

  const std::string dir = ensemble_member_dir(inv.shared_data_dir, member);
  fs::create_directories(dir);

  auto samples = drifting_samples(
      derive_seed(seed, 0xA11CEULL, static_cast<std::uint64_t>(member),
                  static_cast<std::uint64_t>(iteration)),
      iteration, count);
  const std::string rel =
      "m" + std::to_string(member) + "/samples.iter" +
      std::to_string(iteration) + ".txt";
  write_file_atomic(inv.shared_data_dir + "/" + rel, samples_to_text(samples));

  // Manifest update happens after the data lands, so every listed entry is
  // readable; the rewrite is atomic for concurrent snapshot readers.
  const std::string manifest = dir + "/manifest.txt";
  std::vector<std::string> entries = read_manifest(manifest);
  if (std::find(entries.begin(), entries.end(), rel) == entries.end())
    entries.push_back(rel);
  std::string text;
  for (const auto& e : entries) {
    text += e;
    text += '\n';
  }
  write_file_atomic(manifest, text);
  return 0;
}

int kernel_ens_analyze(const KernelInvocation& inv) {
  const int member = std::stoi(inv.args.at(0));
  const int iteration = std::stoi(inv.args.at(1));
  const bool global = inv.args.at(2) == "global";
  const int n_members = std::stoi(inv.args.at(3));

  std::vector<double> all;
  for (int m = 0; m < n_members; ++m) {
    if (!global && m != member) continue;
    const std::string manifest =
        ensemble_member_dir(inv.shared_data_dir, m) + "/manifest.txt";
    for (const auto& rel : read_manifest(manifest)) {
      try {
        auto samples = read_samples_file(inv.shared_data_dir + "/" + rel);
        all.insert(all.end(), samples.begin(), samples.end());
      } catch (const std::exception& e) {
        log_warn("analysis m" + std::to_string(member) +
                 " skipping manifest entry: " + e.what());
      }
    }
  }

  EstimateRow row;
  row.iteration = iteration;
  row.estimate = mean_of(all);
  row.n_samples = static_cast<long>(all.size());
  upsert_estimate(
      ensemble_member_dir(inv.shared_data_dir, member) + "/estimates.csv",
      row);
  return 0;
}

int kernel_smp_sim(const KernelInvocation& inv) {
  const int iteration = std::stoi(inv.args.at(0));
  const int task_index = std::stoi(inv.args.at(1));
  const int count = std::stoi(inv.args.at(2));
  const std::uint64_t seed = std::stoull(inv.args.at(3));

  const std::string dir = inv.shared_data_dir + "/samples";
  fs::create_directories(dir);
  auto samples = drifting_samples(
      derive_seed(seed, 0x5A3BULL, static_cast<std::uint64_t>(iteration),
                  static_cast<std::uint64_t>(task_index)),
      iteration, count);
  write_file_atomic(dir + "/iter" + std::to_string(iteration) + ".t" +
                        std::to_string(task_index) + ".txt",
                    samples_to_text(samples));
  return 0;
}

int kernel_smp_agg(const KernelInvocation& inv) {
  const int iteration = std::stoi(inv.args.at(0));

  const std::string dir = inv.shared_data_dir + "/samples";
  std::vector<std::string> files;
  if (fs::exists(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".txt")
        files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());

  std::vector<double> all;
  for (const auto& f : files) {
    auto samples = read_samples_file(f);
    all.insert(all.end(), samples.begin(), samples.end());
  }
  EstimateRow row;
  row.iteration = iteration;
  row.estimate = mean_of(all);
  row.n_samples = static_cast<long>(all.size());
  upsert_estimate(inv.shared_data_dir + "/estimates.csv", row);
  return 0;
}

// ---- stage templates ------------------------------------------------------

Stage make_ens_sim_stage(const EnsembleParams& p, int member, int iteration) {
  Stage s;
  s.uid = "m" + std::to_string(member) + ".sim" + std::to_string(iteration);
  TaskSpec t;
  t.uid = s.uid + ".t0";
  t.executable = "kernel:ens_sim";
  t.arguments = {std::to_string(member), std::to_string(iteration),
                 std::to_string(p.samples_per_iteration),
                 std::to_string(p.seed)};
  t.duration_hint_s =
      p.sim_duration_base_s + p.sim_duration_stagger_s * (member % 4);
  s.tasks.push_back(std::move(t));
  return s;
}

Stage make_ens_ana_stage(const EnsembleParams& p, int member, int iteration) {
  Stage s;
  s.uid = "m" + std::to_string(member) + ".ana" + std::to_string(iteration);
  TaskSpec t;
  t.uid = s.uid + ".t0";
  t.executable = "kernel:ens_analyze";
  t.arguments = {std::to_string(member), std::to_string(iteration),
                 p.mode == AnalysisMode::global ? "global" : "local",
                 std::to_string(p.n_members)};
  t.duration_hint_s = p.analysis_duration_s;
  s.tasks.push_back(std::move(t));
  return s;
}

Stage make_smp_sim_stage(const SamplingParams& p, int iteration) {
  Stage s;
  s.uid = "samp.sim" + std::to_string(iteration);
  for (int j = 0; j < p.sims_per_iteration; ++j) {
    TaskSpec t;
    t.uid = s.uid + ".t" + std::to_string(j);
    t.executable = "kernel:smp_sim";
    t.arguments = {std::to_string(iteration), std::to_string(j),
                   std::to_string(p.samples_per_sim), std::to_string(p.seed)};
    t.duration_hint_s = p.sim_duration_s;
    s.tasks.push_back(std::move(t));
  }
  return s;
}

Stage make_smp_agg_stage(const SamplingParams& p, int iteration) {
  Stage s;
  s.uid = "samp.agg" + std::to_string(iteration);
  TaskSpec t;
  t.uid = s.uid + ".t0";
  t.executable = "kernel:smp_agg";
  t.arguments = {std::to_string(iteration)};
  t.duration_hint_s = p.sim_duration_s;
  s.tasks.push_back(std::move(t));
  return s;
}

bool is_identity(const std::vector<std::size_t>& perm) {
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[i] != i) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

DriverBuild build_ensemble_workflow(const EnsembleParams& p,
                                    const std::string& shared_data_dir) {
  if (p.n_members < 1) throw EngineError("ensemble needs at least one member");
  if (p.iterations_max < 1) throw EngineError("iterations_max must be >= 1");
  if (p.criterion.tolerance <= 0.0 || p.criterion.window < 1)
    throw EngineError("convergence criterion needs tolerance > 0, window >= 1");

  DriverBuild build;
  build.workflow.shared_data_dir = shared_data_dir;
  for (int m = 0; m < p.n_members; ++m) {
    Pipeline pipe;
    pipe.uid = "m" + std::to_string(m);
    pipe.stages.push_back(make_ens_sim_stage(p, m, 0));
    pipe.stages.push_back(make_ens_ana_stage(p, m, 0));
    const std::string policy = "member." + pipe.uid;
    pipe.post_exec = policy;
    build.workflow.pipelines.push_back(std::move(pipe));

    AdaptationPolicy pol;
    pol.condition = [p, m](const SignalContext& ctx) {
      const int done = static_cast<int>(ctx.pipeline().stages.size()) / 2;
      if (done >= p.iterations_max) return false;
      auto rows = read_estimates(
          ensemble_member_dir(ctx.shared_data_dir, m) + "/estimates.csv");
      return !estimates_converged(rows, p.criterion);
    };
    // Next iteration: append its two stages, let a per-iteration draw decide
    // their order, then refresh the upcoming stage's core counts. All draws
    // derive from (seed, member, iteration), so a re-evaluated trigger stages
    // the same change.
    pol.on_true = [p, m](const SignalContext&, AdaptableView& view) {
      const int iter = static_cast<int>(view.pipeline().stages.size()) / 2;
      view.append_stage(make_ens_sim_stage(p, m, iter));
      view.append_stage(make_ens_ana_stage(p, m, iter));

      SeededRng order_rng(derive_seed(p.seed, 0x0EDE0ULL,
                                      static_cast<std::uint64_t>(m),
                                      static_cast<std::uint64_t>(iter)));
      auto perm = order_rng.permutation(2);
      if (!is_identity(perm)) view.reorder_future_stages(perm);

      SeededRng core_rng(derive_seed(p.seed, 0xC04E5ULL,
                                     static_cast<std::uint64_t>(m),
                                     static_cast<std::uint64_t>(iter)));
      const Stage* next = view.future_stages().front();
      const Uid stage_uid = next->uid;
      std::vector<std::pair<Uid, int>> changes;
      for (const auto& t : next->tasks) {
        int cores = 1 + static_cast<int>(core_rng.next_below(2));
        if (cores != t.cores) changes.emplace_back(t.uid, cores);
      }
      for (const auto& [task_uid, cores] : changes)
        view.set_task_cores(stage_uid, task_uid, cores);
    };
    build.policies.emplace(policy, std::move(pol));
  }
  return build;
}

DriverBuild build_sampling_workflow(const SamplingParams& p,
                                    const std::string& shared_data_dir) {
  if (p.sims_per_iteration < 1 || p.samples_per_sim < 1)
    throw EngineError("sampling driver needs counts >= 1");
  if (p.threshold < 0) throw EngineError("threshold must be >= 0");
  if (p.iterations_max < 1) throw EngineError("iterations_max must be >= 1");

  DriverBuild build;
  build.workflow.shared_data_dir = shared_data_dir;
  Pipeline pipe;
  pipe.uid = "samp";
  pipe.stages.push_back(make_smp_sim_stage(p, 0));
  pipe.stages.push_back(make_smp_agg_stage(p, 0));
  pipe.post_exec = "sampling.extend";
  build.workflow.pipelines.push_back(std::move(pipe));

  AdaptationPolicy pol;
  pol.condition = [p](const SignalContext& ctx) {
    return count_sampling_samples(ctx.shared_data_dir) < p.threshold;
  };
  pol.on_true = [p](const SignalContext&, AdaptableView& view) {
    const int done = static_cast<int>(view.pipeline().stages.size()) / 2;
    if (done >= p.iterations_max)
      throw EngineError(
          "sample threshold " + std::to_string(p.threshold) +
          " not reachable within " + std::to_string(p.iterations_max) +
          " iterations (have " +
          std::to_string(static_cast<long>(done) * p.sims_per_iteration *
                         p.samples_per_sim) +
          " samples)");
    view.append_stage(make_smp_sim_stage(p, done));
    view.append_stage(make_smp_agg_stage(p, done));
    SeededRng order_rng(
        derive_seed(p.seed, 0x0DD1ULL, static_cast<std::uint64_t>(done)));
    auto perm = order_rng.permutation(2);
    if (!is_identity(perm)) view.reorder_future_stages(perm);
  };
  build.policies.emplace("sampling.extend", std::move(pol));
  return build;
}

void register_driver_kernels(KernelRegistry& reg) {
  reg.add("ens_sim", kernel_ens_sim);
  reg.add("ens_analyze", kernel_ens_analyze);
  reg.add("smp_sim", kernel_smp_sim);
  reg.add("smp_agg", kernel_smp_agg);
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw EngineError("cannot write " + tmp);
    out << content;
  }
  fs::rename(tmp, path);
}

std::vector<double> read_samples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EngineError("unreadable sample file: " + path);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(std::stod(line));
  return out;
}

std::vector<std::string> read_manifest(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  if (!in) return out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::vector<EstimateRow> read_estimates(const std::string& path) {
  std::ifstream in(path);
  std::vector<EstimateRow> rows;
  if (!in) return rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t c1 = line.find(',');
    std::size_t c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) continue;
    EstimateRow r;
    r.iteration = std::stoi(line.substr(0, c1));
    r.estimate = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    r.n_samples = std::stol(line.substr(c2 + 1));
    rows.push_back(r);
  }
  return rows;
}

bool estimates_converged(const std::vector<EstimateRow>& rows,
                         const ConvergenceCriterion& c) {
  if (static_cast<int>(rows.size()) < c.window + 1) return false;
  for (std::size_t i = rows.size() - static_cast<std::size_t>(c.window);
       i < rows.size(); ++i)
    if (std::abs(rows[i].estimate - rows[i - 1].estimate) >= c.tolerance)
      return false;
  return true;
}

long count_sampling_samples(const std::string& data_dir) {
  const std::string dir = data_dir + "/samples";
  if (!fs::exists(dir)) return 0;
  long total = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt")
      continue;
    try {
      total += static_cast<long>(read_samples_file(entry.path().string()).size());
    } catch (const std::exception&) {
      // racing a rewrite; the settled copy gets counted next evaluation
    }
  }
  return total;
}

std::string ensemble_member_dir(const std::string& shared_data_dir,
                                int member) {
  return shared_data_dir + "/m" + std::to_string(member);
}

}  // namespace adaflow
