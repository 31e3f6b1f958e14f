#pragma once

// Biased HSIC estimator with Gaussian RBF kernels,
//
//   HSIC = tr(K H L H) / (n - 1)^2,   H = I - 11^T / n,
//
// where K and L are the Gram matrices of the two samples.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace creator {

struct HsicConfig {
  enum class Bandwidth { median_heuristic, fixed };
  Bandwidth bandwidth = Bandwidth::median_heuristic;
  double fixed_bandwidth_u = 1.0;
  double fixed_bandwidth_v = 1.0;
  /// Evaluate on a seeded uniform subsample of this many rows when n exceeds it.
  std::optional<std::size_t> subsample = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HsicValue {
  double value = 0.0;
  bool degenerate = false;  ///< one side was constant; value forced to 0
};

struct Bandwidth {
  double value = 1.0;
  bool degenerate = false;  ///< all points identical; value fell back to 1
};

/// Median pairwise Euclidean distance between rows, computed on at most 1000
/// seeded-subsampled rows.
Bandwidth median_bandwidth(const Eigen::MatrixXd& points, std::uint64_t seed = 0);

/// Gram matrix of exp(-|a - b|^2 / (2 sigma^2)) over rows.
Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& points, double sigma);

/// Sorted row indices of a seeded uniform subsample without replacement;
/// all rows when n <= cap.
std::vector<Eigen::Index> subsample_rows(Eigen::Index n, std::size_t cap, std::uint64_t seed);

/// Fixes the first argument and evaluates HSIC against many second arguments
/// sharing the same rows (the first argument's Gram matrix is built once).
class HsicEvaluator {
 public:
  /// `u` must already be restricted to the rows that `v` will use.
  HsicEvaluator(const Eigen::VectorXd& u, const HsicConfig& cfg);

  HsicValue operator()(const Eigen::MatrixXd& v) const;
  bool degenerate() const noexcept { return degenerate_; }

 private:
  HsicConfig cfg_;
  Eigen::MatrixXd centered_gram_;
  Eigen::Index n_ = 0;
  bool degenerate_ = false;
};

/// HSIC between a scalar sample u (length n) and a vector sample v (n x m).
HsicValue hsic_biased(const Eigen::VectorXd& u, const Eigen::MatrixXd& v, const HsicConfig& cfg);

/// True when a sample has no spread (max - min below 1e-12 of its magnitude).
bool is_constant(const Eigen::MatrixXd& sample);

}  // namespace creator
