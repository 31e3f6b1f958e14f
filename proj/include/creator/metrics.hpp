#pragma once

// Scores for a recovered (graph, features) pair against ground truth.

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "creator/dag.hpp"

namespace creator {

/// Unordered pairs whose edge status differs; a reversed edge costs 1.
std::size_t shd(const Dag& estimated, const Dag& truth);

/// Number of true edges i -> j with position[i] > position[j].
std::size_t d_top(const std::vector<std::size_t>& position, const Adjacency& truth);

/// position[order[r]] = r.
std::vector<std::size_t> positions_from_order(const std::vector<std::size_t>& order);

struct LocR2Options {
  /// Regress on sur(i) instead of sur(i) plus i itself.
  bool literal_surrounding = false;
  /// Exhaustive permutation search up to this d, greedy beyond.
  std::size_t exhaustive_limit = 8;
};

struct LocR2Result {
  double value = 0.0;
  /// assignment[i] = estimated column matched to true node i.
  std::vector<std::size_t> assignment;
  std::vector<double> per_node;  ///< averaged over environments, under `assignment`
  bool zero_variance = false;    ///< some estimated column was constant
  bool greedy = false;
};

/// R^2 (with intercept) of `target` regressed on `regressors`; 0 for a
/// constant target.
double r_squared(const Eigen::VectorXd& target, const Eigen::MatrixXd& regressors, bool* zero_variance = nullptr);

/// score(i, c): mean over environments of R^2 of estimated column c on the
/// true surrounding block of node i.
Eigen::MatrixXd loc_r2_scores(const std::vector<Eigen::MatrixXd>& Y_hat, const std::vector<Eigen::MatrixXd>& Y_true,
                              const Dag& truth, const LocR2Options& opts = {}, bool* zero_variance = nullptr);

/// Assignment maximizing sum_i score(i, assignment[i]); ties go to the
/// lexicographically smallest assignment.
std::vector<std::size_t> best_assignment(const Eigen::MatrixXd& score, std::size_t exhaustive_limit = 8,
                                         bool* greedy = nullptr);

LocR2Result loc_r2(const std::vector<Eigen::MatrixXd>& Y_hat, const std::vector<Eigen::MatrixXd>& Y_true,
                   const Dag& truth, const LocR2Options& opts = {});

/// Matches recovered noises to true noises by mean absolute correlation
/// over environments; result[i] = recovered column of true node i.
std::vector<std::size_t> match_noises(const std::vector<Eigen::MatrixXd>& Z_hat,
                                      const std::vector<Eigen::MatrixXd>& Z_true);

/// The estimated graph over positions, relabelled so position
/// assignment[i] becomes node i.
Dag relabel(const Dag& over_positions, const std::vector<std::size_t>& assignment);

struct MetricsReport {
  std::size_t shd = 0;
  double loc_r2 = 0.0;
  std::vector<std::size_t> best_permutation;  ///< LocR2 assignment
  std::size_t d_top = 0;
  std::vector<double> per_node_loc_r2;
  /// position_of_node[i] = recovered position identified with true node i.
  std::vector<std::size_t> position_of_node;
  std::string matching;  ///< "noise" or "features"
  bool zero_variance = false;
  bool greedy = false;
  double fit_seconds = 0.0;
};

/// Identifies recovered positions with true nodes (via noises when both
/// sides have them, via the LocR2 assignment otherwise), then scores.
MetricsReport evaluate_recovery(const Dag& estimated_over_positions, const std::vector<Eigen::MatrixXd>& Y_hat,
                                const std::vector<Eigen::MatrixXd>& Z_hat, const Dag& truth,
                                const std::vector<Eigen::MatrixXd>& Y_true,
                                const std::vector<Eigen::MatrixXd>& Z_true, const LocR2Options& opts = {});

}  // namespace creator
