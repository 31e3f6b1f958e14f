#pragma once

// Linear SCM with a shared linear mixing map, observed in K environments:
//
//   y = W^T y + Omega z,    x = H y
//
// Data matrices keep samples in rows, so Y = Z Omega (I - W)^{-1} and X = Y H^T.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "creator/dag.hpp"
#include "creator/numerics.hpp"

namespace creator {

enum class NoiseFamily { laplace, exponential, uniform, gumbel, beta, gamma1, chisq1, chisq3, gamma3, gennorm };

/// The nine non-Gaussian families used for weights and noise (gennorm excluded).
const std::vector<NoiseFamily>& table_families();

std::string to_string(NoiseFamily f);
NoiseFamily parse_noise_family(const std::string& name);

struct NoiseSpec {
  NoiseFamily family = NoiseFamily::laplace;
  double shape = 2.0;  ///< gennorm exponent; ignored by other families
  double scale = 1.0;  ///< standard deviation after standardization

  void validate() const;
  /// "laplace", "gennorm:2.5", ...
  std::string to_string() const;
  static NoiseSpec parse(const std::string& text);
  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// How edge weights are drawn before multiplying by the adjacency and sigma.
struct WeightSpec {
  enum class Mode { random_family, fixed_family, bounded };
  Mode mode = Mode::random_family;
  NoiseFamily family = NoiseFamily::uniform;  ///< used by fixed_family
  double low = 0.5;                           ///< bounded: |w| ~ U[low, high], random sign
  double high = 2.0;

  std::string to_string() const;
  static WeightSpec parse(const std::string& text);
};

/// Parameters of one environment.
struct EnvParams {
  Eigen::MatrixXd W;               ///< d x d, W(i, j) != 0 iff i -> j
  Eigen::VectorXd omega;           ///< positive noise scales
  std::vector<NoiseSpec> noise;    ///< one descriptor per latent component
  NoiseFamily weight_family = NoiseFamily::uniform;

  /// U = Omega^{-1} (I - W)^T; row i holds the structural equation of node i.
  Eigen::MatrixXd structural_rows() const;
};

struct ScmEnsemble {
  Dag dag;
  Eigen::MatrixXd H;  ///< p x d mixing map
  std::vector<EnvParams> envs;

  std::size_t d() const { return dag.size(); }
  std::size_t p() const { return static_cast<std::size_t>(H.rows()); }
  std::size_t K() const { return envs.size(); }
  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

struct Environment {
  Eigen::MatrixXd X;                ///< n x p observations
  std::optional<Eigen::MatrixXd> Y; ///< n x d latent features
  std::optional<Eigen::MatrixXd> Z; ///< n x d standardized exogenous noise
};

struct MultiEnvDataset {
  std::vector<Environment> envs;
  std::optional<ScmEnsemble> ensemble;

  std::size_t K() const { return envs.size(); }
  std::size_t p() const { return envs.empty() ? 0 : static_cast<std::size_t>(envs.front().X.cols()); }
  bool has_ground_truth() const;
  void validate() const;
};

/// Raw i.i.d. draws from the family's reference parameterization.
Eigen::VectorXd sample_raw(const NoiseSpec& spec, std::size_t n, std::uint64_t seed);

/// Centered, unit-variance draws rescaled to `spec.scale`.
Eigen::VectorXd sample_noise(const NoiseSpec& spec, std::size_t n, std::uint64_t seed);

/// Edge weights times adjacency times sigma; Omega ~ U[0.5, 1.5].
EnvParams sample_env_params(const Dag& dag, const WeightSpec& weights, double sigma_scale, std::uint64_t seed);

/// p x d standard normal matrix of full column rank.
Eigen::MatrixXd sample_mixing(std::size_t p, std::size_t d, std::uint64_t seed);

/// Noise descriptors per environment and component.
///  setting 1: a fresh family per environment and component;
///  setting 2: one family per component, shared across environments,
///             distinct across components.
/// A fixed family overrides both.
std::vector<std::vector<NoiseSpec>> assign_noise(std::size_t d, std::size_t K, int setting,
                                                 const std::optional<NoiseSpec>& fixed, std::uint64_t seed);

MultiEnvDataset simulate(const ScmEnsemble& ensemble, std::size_t n, std::uint64_t seed);

/// Per node: does span{U^(k)_i : k} have dimension |pa(i)| + 1?
std::vector<bool> check_degeneracy(const ScmEnsemble& ensemble, RankTolerance tol = RankTolerance{});

}  // namespace creator
