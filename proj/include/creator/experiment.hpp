#pragma once

// Synthetic experiments: generation from a config, fit-and-score runs,
// parameter sweeps with aggregate tables and line charts.

#include <cstdint>
#include <functional>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "creator/creator.hpp"
#include "creator/io.hpp"
#include "creator/metrics.hpp"
#include "creator/model.hpp"

namespace creator {

struct ExperimentConfig {
  std::size_t d = 3;
  std::size_t K = 3;
  std::size_t n = 1000;
  std::optional<std::size_t> p;  ///< observed dimension; defaults to d
  int setting = 1;
  double sigma_scale = 1.0;
  std::optional<NoiseSpec> noise;  ///< nullopt draws families per setting
  WeightSpec weights;
  double edge_prob = 0.5;
  std::size_t repetitions = 1;
  std::uint64_t seed = 0;
  CreatorConfig creator;
  fs::path output_dir;
  /// Use this graph instead of sampling one.
  std::optional<Adjacency> fixed_dag;
  LocR2Options loc_r2;
  bool record_timing = true;

  std::size_t observed_dim() const { return p.value_or(d); }
  void validate() const;
  /// Generation parameters recorded in manifests and result tables.
  Json to_json() const;
};

ScmEnsemble generate_ensemble(const ExperimentConfig& cfg, std::uint64_t seed);
MultiEnvDataset generate_dataset(const ExperimentConfig& cfg, std::uint64_t seed);
/// Writes a generated dataset directory and returns its manifest.
Json write_generated(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir);

/// CreatorConfig with every seed derived from `seed`.
CreatorConfig seeded(const CreatorConfig& base, std::uint64_t seed);

/// Entangled features and noises implied by a result file: rows of alpha
/// are replayed in `order`; the returned graph and features are indexed
/// by peeling position.
struct ReplayedResult {
  Dag dag_over_positions;
  std::vector<Eigen::MatrixXd> Y_hat;
  std::vector<Eigen::MatrixXd> Z_hat;
};
ReplayedResult replay_result(const MultiEnvDataset& data, const ResultFile& result);

/// Scores a result against the dataset's ground truth.  Throws
/// MissingGroundTruth when the dataset lacks the generating graph or Y.
MetricsReport evaluate_result(const MultiEnvDataset& data, const ResultFile& result, const LocR2Options& opts = {});

struct RunOutcome {
  std::uint64_t seed = 0;
  std::optional<MetricsReport> report;
  std::string error;  ///< "stage: message" when the run failed
};

/// generate -> fit -> evaluate for one seed, in memory.
RunOutcome run_once(const ExperimentConfig& cfg, std::uint64_t seed);

/// Seeds of the repetitions of a config: derive_seed(cfg.seed, {rep}).
std::vector<std::uint64_t> repetition_seeds(const ExperimentConfig& cfg);

std::string metrics_csv_header();
std::string metrics_csv_row(std::uint64_t seed, const MetricsReport& r);
std::string metrics_csv(const std::vector<RunOutcome>& runs);
Json metrics_json(const MetricsReport& r);

/// Repetitions of one config run on the worker pool; output order follows
/// the repetition index.
std::vector<RunOutcome> run_repetitions(const ExperimentConfig& cfg);

/// Worker count: CREATOR_THREADS when set and positive, else hardware
/// concurrency, never more than `jobs`.
std::size_t worker_count(std::size_t jobs);

/// Calls task(i) for i in [0, jobs) on a bounded pool of threads.
void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& task);

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  std::optional<double> stddev;  ///< sample standard deviation; needs two values
};
Summary summarize(std::vector<double> values);

struct SweepSpec {
  std::vector<std::size_t> d = {2, 3, 5, 7};
  /// Environment counts as multiples of d ("d", "2d") or absolute ("6").
  std::vector<std::string> k_rule = {"d", "2d"};
  std::vector<std::size_t> n = {1000};
  std::vector<int> setting = {1, 2};
  std::vector<double> sigma_scale = {1.0};
  std::vector<std::string> noise = {"mixed"};
  ExperimentConfig base;  ///< repetitions, seed, creator flags, weights, p
};

std::size_t resolve_k(const std::string& rule, std::size_t d);

struct CellResult {
  ExperimentConfig config;
  std::string noise_label;
  std::string k_rule;
  std::vector<RunOutcome> runs;
};

/// Runs every cell x repetition; writes bench.csv,
/// cell_<c>/metrics.csv and metrics.json, and one SVG chart per metric.
std::vector<CellResult> run_bench(const SweepSpec& spec, const fs::path& out_dir);

std::string bench_csv(const std::vector<CellResult>& cells);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};
/// Minimal line chart: axes, tick labels, one polyline per series, legend.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

}  // namespace creator
