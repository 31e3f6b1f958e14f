#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "creator/numerics.hpp"

namespace creator {

enum class IcaNonlinearity { logcosh, cube };

struct IcaConfig {
  IcaNonlinearity nonlinearity = IcaNonlinearity::logcosh;
  int max_iter = 400;
  double conv_tol = 1e-6;
  int restarts = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Unmixing rows for one environment.
struct UnmixingCandidates {
  /// r x p; each row is a unit-norm alpha with first non-negligible entry positive.
  Eigen::MatrixXd alpha;
  /// Standard deviation of centered(X) * alpha_j; dividing gives unit-variance sources.
  Eigen::VectorXd source_scale;
  bool converged = false;
  int iterations = 0;
  /// Negentropy proxy of the selected restart.
  double contrast = 0.0;

  Eigen::Index count() const { return alpha.rows(); }
};

/// Symmetric fixed-point FastICA on PCA-whitened data.  Runs `restarts`
/// initializations (identity, then seeded random rotations) and keeps the one
/// with the largest negentropy proxy.  Non-convergence is reported, not thrown.
UnmixingCandidates fast_ica(const Eigen::MatrixXd& x, Eigen::Index n_components, const IcaConfig& cfg,
                            RankTolerance tol = RankTolerance{});

}  // namespace creator
