#pragma once

// Three-stage recovery of latent causal features from K environments:
//
//  1. ordering:      peel off one root-node noise per iteration, picking among
//                    ICA unmixing rows the one whose projection is most
//                    independent (HSIC) of the remaining residual;
//  2. pruning:       regress recovered noises on entangled features and keep
//                    edge j -> i iff appending column j of the coefficient
//                    rows raises the rank across environments;
//  3. disentangling: intersect the coefficient-row subspaces of each node and
//                    its children to strip entanglement.

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "creator/dag.hpp"
#include "creator/hsic.hpp"
#include "creator/ica.hpp"
#include "creator/model.hpp"
#include "creator/numerics.hpp"

namespace creator {

inline constexpr double kSampleRankTol = 0.05;

struct CreatorConfig {
  IcaConfig ica;
  HsicConfig hsic;
  double sample_rank_tol = kSampleRankTol;
  double population_rank_tol = kPopulationRankTol;
  /// Replace the ordering stage by exact quantities derived from the
  /// dataset's generating ensemble.
  bool population_mode = false;
  double ridge = 0.0;
  std::uint64_t seed = 0;

  RankTolerance rank_tol() const {
    return RankTolerance(population_mode ? population_rank_tol : sample_rank_tol);
  }
  void validate() const;
};

inline constexpr double kDegenerateLoss = std::numeric_limits<double>::infinity();

struct OrderingResult {
  Eigen::MatrixXd alpha;                  ///< d x p, row i = alpha_i (unit norm)
  std::vector<Eigen::MatrixXd> Z_hat;     ///< per env, n x d recovered noises
  std::vector<Eigen::MatrixXd> Y_tilde;   ///< per env, n x d entangled features
  std::vector<double> selection_loss;     ///< loss of the chosen candidate per iteration
  std::vector<std::vector<double>> candidate_losses;
  std::vector<std::size_t> selected_env;  ///< environment whose ICA produced alpha_i
  std::vector<std::size_t> selected_row;  ///< row within that environment's candidates
  std::vector<bool> ica_converged;        ///< per iteration, all environments converged
  std::vector<std::string> warnings;
};

struct StageTimings {
  double ordering = 0.0;
  double pruning = 0.0;
  double disentangling = 0.0;
  double total = 0.0;
};

struct Disentanglement {
  Eigen::MatrixXd B_breve;          ///< d x d, unit rows
  std::vector<bool> fallback;       ///< node used e_i because the intersection was empty
  std::vector<double> residual;     ///< smallest singular value of M_i
};

struct RecoveryResult {
  OrderingResult ordering;
  Dag dag_hat;                      ///< over recovered positions 0..d-1
  std::vector<Eigen::MatrixXd> B_hat;
  Eigen::MatrixXd B_breve;
  Eigen::VectorXd y_hat_scale;      ///< column scaling giving unit variance in env 0
  std::vector<Eigen::MatrixXd> Y_hat;
  std::vector<bool> disentangle_fallback;
  /// Population mode only: true node placed at each recovered position.
  std::optional<std::vector<std::size_t>> true_order;
  bool regression_fallback = false;
  StageTimings timings;
  std::vector<std::string> warnings;
};

/// Sum over environments and residual coordinates of HSIC(s, r_j), where
/// s = P alpha and r = residual of P after regressing on s.  Returns
/// kDegenerateLoss when s has no variance in some environment.
double candidate_loss(const Eigen::VectorXd& alpha, const std::vector<Eigen::MatrixXd>& projected,
                      const CreatorConfig& cfg);

/// Sequential root-node peeling; every environment needs n > p.
OrderingResult subroutine1_order(const MultiEnvDataset& data, std::size_t d, const CreatorConfig& cfg);

/// Per environment, B_hat with Z_hat ~ Y_tilde * B_hat^T (B_hat(i, j) multiplies y_tilde_j).
std::vector<Eigen::MatrixXd> regress_noise_on_features(const std::vector<Eigen::MatrixXd>& Z_hat,
                                                       const std::vector<Eigen::MatrixXd>& Y_tilde, double ridge,
                                                       bool* used_pseudo_inverse = nullptr);

/// Rank-drop test over the cross-environment coefficient vectors.
Dag prune_from_coefficients(const std::vector<Eigen::MatrixXd>& B_hat, RankTolerance tol);

Dag subroutine2_prune(const std::vector<Eigen::MatrixXd>& Z_hat, const std::vector<Eigen::MatrixXd>& Y_tilde,
                      const CreatorConfig& cfg, std::vector<std::string>* warnings = nullptr);

/// Row i of B_breve is the unit vector closest to every subspace
/// span{B_hat^(k)_j : k} for j in {i} plus the children of i.  Subspace
/// dimensions follow the graph (|pa(j)| + 1, capped by K).
Disentanglement disentangle_from_coefficients(const std::vector<Eigen::MatrixXd>& B_hat, const Dag& dag,
                                              RankTolerance tol);

struct DisentangledFeatures {
  Disentanglement basis;
  Eigen::VectorXd scale;
  std::vector<Eigen::MatrixXd> Y_hat;
};

DisentangledFeatures subroutine3_disentangle(const std::vector<Eigen::MatrixXd>& Y_tilde,
                                             const std::vector<Eigen::MatrixXd>& Z_hat, const Dag& dag_hat,
                                             const CreatorConfig& cfg);

/// Applies B_breve and normalizes columns to unit variance in environment 0.
DisentangledFeatures apply_disentanglement(const std::vector<Eigen::MatrixXd>& Y_tilde, Disentanglement basis);

/// Exact coefficient matrices Omega^{-1} (I - W)^T B^{-1} with nodes relabelled
/// by `order` (order[r] = node at position r) and B lower triangular.
std::vector<Eigen::MatrixXd> population_coefficients(const ScmEnsemble& ensemble, const std::vector<std::size_t>& order,
                                                     const Eigen::MatrixXd& B);

/// Seeded lower-triangular matrix with diagonal magnitudes in [0.5, 1.5].
Eigen::MatrixXd random_lower_triangular(std::size_t d, std::uint64_t seed);

/// End-to-end pipeline.  In population mode the dataset must carry its
/// ensemble; the ordering stage then uses exact unmixing rows.
RecoveryResult fit(const MultiEnvDataset& data, std::size_t d, const CreatorConfig& cfg);

/// Recomputes entangled features and noises from unmixing rows by replaying
/// the projection recursion (used for results produced elsewhere).
OrderingResult replay_ordering(const MultiEnvDataset& data, const Eigen::MatrixXd& alpha);

}  // namespace creator
