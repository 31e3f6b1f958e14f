#include "creator/creator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>

#include "creator/errors.hpp"
#include "creator/seeding.hpp"

namespace creator {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Relative cutoff below which a projected signal counts as numerically zero.
constexpr double kNullSignal = 1e-9;

double column_sd(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(v.size() - 1, 1)));
}

double max_column_sd(const Eigen::MatrixXd& m) {
  double out = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) out = std::max(out, column_sd(m.col(j)));
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  if (rows.size() == static_cast<std::size_t>(m.rows())) return m;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

void check_shapes(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b, const char* what) {
  if (a.size() != b.size() || a.empty()) throw ConfigError(std::string(what) + ": environment counts differ or are zero");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].rows() != b[k].rows() || a[k].cols() != b[k].cols()) {
      throw ConfigError(std::string(what) + ": shape mismatch in env " + std::to_string(k));
    }
  }
}

}  // namespace

void CreatorConfig::validate() const {
  ica.validate();
  hsic.validate();
  RankTolerance{sample_rank_tol};
  RankTolerance{population_rank_tol};
  if (sample_rank_tol < population_rank_tol) throw ConfigError("sample rank tolerance below population tolerance");
  if (ridge < 0.0) throw ConfigError("ridge must be nonnegative");
}

double candidate_loss(const Eigen::VectorXd& alpha, const std::vector<Eigen::MatrixXd>& projected,
                      const CreatorConfig& cfg) {
  if (alpha.size() == 0 || alpha.cwiseAbs().maxCoeff() <= 0.0) throw ConfigError("candidate_loss: alpha must be nonzero");
  double total = 0.0;
  for (const auto& p : projected) {
    if (p.cols() != alpha.size()) throw ConfigError("candidate_loss: dimension mismatch");
    const double scale = max_column_sd(p);
    const Eigen::VectorXd s = p * alpha;
    if (!(column_sd(s) > kNullSignal * scale * alpha.norm())) return kDegenerateLoss;
    const Eigen::MatrixXd r = residualize(p, s);

    const std::size_t cap = cfg.hsic.subsample.value_or(static_cast<std::size_t>(p.rows()));
    const auto rows = subsample_rows(p.rows(), cap, cfg.hsic.seed);
    const Eigen::VectorXd s_sub = take_rows(s, rows);
    const Eigen::MatrixXd r_sub = take_rows(r, rows);
    const HsicEvaluator hsic(s_sub, cfg.hsic);
    if (hsic.degenerate()) return kDegenerateLoss;
    for (Eigen::Index j = 0; j < r_sub.cols(); ++j) {
      if (!(column_sd(r.col(j)) > kNullSignal * scale)) continue;
      total += hsic(r_sub.col(j)).value;
    }
  }
  return total;
}

OrderingResult subroutine1_order(const MultiEnvDataset& data, std::size_t d, const CreatorConfig& cfg) {
  cfg.validate();
  data.validate();
  const std::size_t K = data.K();
  const auto p = static_cast<Eigen::Index>(data.p());
  if (d < 1 || static_cast<Eigen::Index>(d) > p) throw ConfigError("ordering: need 1 <= d <= p");
  for (std::size_t k = 0; k < K; ++k) {
    if (data.envs[k].X.rows() <= p) throw ConfigError("ordering: env " + std::to_string(k) + " needs n > p");
  }

  OrderingResult out;
  out.alpha.resize(static_cast<Eigen::Index>(d), p);
  std::vector<Eigen::MatrixXd> centered(K);
  std::vector<Eigen::MatrixXd> projected(K);
  for (std::size_t k = 0; k < K; ++k) {
    centered[k] = center_columns(data.envs[k].X);
    projected[k] = centered[k];
    out.Z_hat.emplace_back(centered[k].rows(), static_cast<Eigen::Index>(d));
    out.Y_tilde.emplace_back(centered[k].rows(), static_cast<Eigen::Index>(d));
  }

  const RankTolerance ica_tol(cfg.population_rank_tol);
  for (std::size_t i = 0; i < d; ++i) {
    const auto components = static_cast<Eigen::Index>(d - i);
    IcaConfig ica = cfg.ica;
    ica.seed = derive_seed(cfg.ica.seed, {i});

    std::vector<UnmixingCandidates> pool;
    bool all_converged = true;
    for (std::size_t k = 0; k < K; ++k) {
      try {
        pool.push_back(fast_ica(projected[k], components, ica, ica_tol));
      } catch (const DegenerateData& e) {
        throw StructuralFailure("ordering", "iteration " + std::to_string(i + 1) + ", env " + std::to_string(k) +
                                                ": " + e.what());
      }
      if (pool.back().count() < components) {
        throw StructuralFailure("ordering", "iteration " + std::to_string(i + 1) + ", env " + std::to_string(k) +
                                                ": projected data has rank " + std::to_string(pool.back().count()) +
                                                " < " + std::to_string(components));
      }
      all_converged = all_converged && pool.back().converged;
    }
    if (!all_converged) out.warnings.push_back("ICA did not converge at iteration " + std::to_string(i + 1));

    // Lowest environment, then lowest row, wins ties.
    double best = kDegenerateLoss;
    std::size_t best_k = K, best_row = 0;
    std::vector<double> losses;
    for (std::size_t k = 0; k < K; ++k) {
      for (Eigen::Index row = 0; row < pool[k].count(); ++row) {
        const Eigen::VectorXd alpha = pool[k].alpha.row(row).transpose();
        const double loss = candidate_loss(alpha, projected, cfg);
        losses.push_back(loss);
        if (loss < best) {
          best = loss;
          best_k = k;
          best_row = static_cast<std::size_t>(row);
        }
      }
    }
    if (best_k == K) {
      throw StructuralFailure("ordering", "iteration " + std::to_string(i + 1) + ": every candidate is degenerate");
    }

    const Eigen::VectorXd alpha = pool[best_k].alpha.row(static_cast<Eigen::Index>(best_row)).transpose();
    out.alpha.row(static_cast<Eigen::Index>(i)) = alpha.transpose();
    out.selection_loss.push_back(best);
    out.candidate_losses.push_back(std::move(losses));
    out.selected_env.push_back(best_k);
    out.selected_row.push_back(best_row);
    out.ica_converged.push_back(all_converged);
    for (std::size_t k = 0; k < K; ++k) {
      const auto col = static_cast<Eigen::Index>(i);
      out.Y_tilde[k].col(col) = centered[k] * alpha;
      out.Z_hat[k].col(col) = projected[k] * alpha;
      projected[k] = residualize(projected[k], out.Z_hat[k].col(col));
    }
  }
  return out;
}

OrderingResult replay_ordering(const MultiEnvDataset& data, const Eigen::MatrixXd& alpha) {
  data.validate();
  if (alpha.cols() != static_cast<Eigen::Index>(data.p())) throw ConfigError("replay: alpha width differs from p");
  const Eigen::Index d = alpha.rows();
  OrderingResult out;
  out.alpha = alpha;
  for (const auto& env : data.envs) {
    const Eigen::MatrixXd xc = center_columns(env.X);
    Eigen::MatrixXd projected = xc;
    Eigen::MatrixXd z(xc.rows(), d), y(xc.rows(), d);
    for (Eigen::Index i = 0; i < d; ++i) {
      y.col(i) = xc * alpha.row(i).transpose();
      z.col(i) = projected * alpha.row(i).transpose();
      projected = residualize(projected, z.col(i));
    }
    out.Z_hat.push_back(std::move(z));
    out.Y_tilde.push_back(std::move(y));
  }
  return out;
}

std::vector<Eigen::MatrixXd> regress_noise_on_features(const std::vector<Eigen::MatrixXd>& Z_hat,
                                                       const std::vector<Eigen::MatrixXd>& Y_tilde, double ridge,
                                                       bool* used_pseudo_inverse) {
  check_shapes(Z_hat, Y_tilde, "regress_noise_on_features");
  if (used_pseudo_inverse) *used_pseudo_inverse = false;
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t k = 0; k < Z_hat.size(); ++k) {
    if (Y_tilde[k].rows() <= Y_tilde[k].cols()) throw ConfigError("regress_noise_on_features: need n > d");
    auto fit = least_squares(Y_tilde[k], Z_hat[k], ridge);
    if (used_pseudo_inverse && fit.used_pseudo_inverse) *used_pseudo_inverse = true;
    out.push_back(fit.coefficients.transpose());
  }
  return out;
}

Dag prune_from_coefficients(const std::vector<Eigen::MatrixXd>& B_hat, RankTolerance tol) {
  if (B_hat.empty()) throw ConfigError("pruning: no environments");
  const Eigen::Index d = B_hat.front().rows();
  const auto K = static_cast<Eigen::Index>(B_hat.size());
  Adjacency adj = Adjacency::Constant(d, d, false);
  for (Eigen::Index i = 1; i < d; ++i) {
    // Column l of `row` holds (B_hat^(k)(i, l))_k.
    Eigen::MatrixXd row(K, d);
    for (Eigen::Index k = 0; k < K; ++k) row.row(k) = B_hat[static_cast<std::size_t>(k)].row(i);
    for (Eigen::Index j = 0; j < i; ++j) {
      const Eigen::MatrixXd c_hat = row.middleCols(j + 1, i - j);
      Eigen::MatrixXd c_tilde(K, i - j + 1);
      c_tilde << c_hat, row.col(j);
      const auto r_hat = c_hat.cwiseAbs().maxCoeff() > 0.0 ? svd_rank(c_hat, tol) : 0;
      const auto r_tilde = c_tilde.cwiseAbs().maxCoeff() > 0.0 ? svd_rank(c_tilde, tol) : 0;
      adj(j, i) = r_hat == r_tilde - 1;
    }
  }
  return Dag(std::move(adj));
}

Dag subroutine2_prune(const std::vector<Eigen::MatrixXd>& Z_hat, const std::vector<Eigen::MatrixXd>& Y_tilde,
                      const CreatorConfig& cfg, std::vector<std::string>* warnings) {
  if (Z_hat.size() < 2 && warnings) warnings->push_back("pruning with K < 2: rank tests are vacuous");
  return prune_from_coefficients(regress_noise_on_features(Z_hat, Y_tilde, cfg.ridge), cfg.rank_tol());
}

Disentanglement disentangle_from_coefficients(const std::vector<Eigen::MatrixXd>& B_hat, const Dag& dag,
                                              RankTolerance tol) {
  if (B_hat.empty()) throw ConfigError("disentangling: no environments");
  const Eigen::Index d = B_hat.front().rows();
  if (static_cast<Eigen::Index>(dag.size()) != d) throw ConfigError("disentangling: DAG size differs from d");
  const auto K = static_cast<Eigen::Index>(B_hat.size());

  std::vector<Eigen::MatrixXd> complement(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::MatrixXd stacked(K, d);
    for (Eigen::Index k = 0; k < K; ++k) stacked.row(k) = B_hat[static_cast<std::size_t>(k)].row(j);
    const auto expected = static_cast<Eigen::Index>(dag.parents(static_cast<std::size_t>(j)).size()) + 1;
    const Eigen::Index dim = std::min({expected, K, d});
    complement[static_cast<std::size_t>(j)] =
        Eigen::MatrixXd::Identity(d, d) - orthonormal_projector(stacked, dim);
  }

  Disentanglement out;
  out.B_breve.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::MatrixXd m = complement[static_cast<std::size_t>(i)].transpose() * complement[static_cast<std::size_t>(i)];
    for (auto c : dag.children(static_cast<std::size_t>(i))) m += complement[c].transpose() * complement[c];
    const auto ms = min_singular(m);
    const bool empty = ms.value > 10.0 * tol.value();
    out.fallback.push_back(empty);
    out.residual.push_back(ms.value);
    out.B_breve.row(i) = empty ? Eigen::RowVectorXd::Unit(d, i) : Eigen::RowVectorXd(ms.vector.transpose());
  }
  return out;
}

DisentangledFeatures apply_disentanglement(const std::vector<Eigen::MatrixXd>& Y_tilde, Disentanglement basis) {
  if (Y_tilde.empty()) throw ConfigError("disentangling: no environments");
  DisentangledFeatures out;
  const Eigen::Index d = basis.B_breve.rows();
  const Eigen::MatrixXd first = Y_tilde.front() * basis.B_breve.transpose();
  out.scale.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double sd = column_sd(first.col(i));
    out.scale(i) = sd > 0.0 ? 1.0 / sd : 1.0;
  }
  for (const auto& y : Y_tilde) out.Y_hat.push_back(y * basis.B_breve.transpose() * out.scale.asDiagonal());
  out.basis = std::move(basis);
  return out;
}

DisentangledFeatures subroutine3_disentangle(const std::vector<Eigen::MatrixXd>& Y_tilde,
                                             const std::vector<Eigen::MatrixXd>& Z_hat, const Dag& dag_hat,
                                             const CreatorConfig& cfg) {
  const auto B_hat = regress_noise_on_features(Z_hat, Y_tilde, cfg.ridge);
  return apply_disentanglement(Y_tilde, disentangle_from_coefficients(B_hat, dag_hat, cfg.rank_tol()));
}

std::vector<Eigen::MatrixXd> population_coefficients(const ScmEnsemble& ensemble, const std::vector<std::size_t>& order,
                                                     const Eigen::MatrixXd& B) {
  const auto d = static_cast<Eigen::Index>(ensemble.d());
  if (order.size() != ensemble.d() || B.rows() != d || B.cols() != d) {
    throw ConfigError("population_coefficients: shape mismatch");
  }
  Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index r = 0; r < d; ++r) perm(r, static_cast<Eigen::Index>(order[static_cast<std::size_t>(r)])) = 1.0;
  const Eigen::MatrixXd b_inv = B.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  std::vector<Eigen::MatrixXd> out;
  for (const auto& env : ensemble.envs) out.push_back(perm * env.structural_rows() * perm.transpose() * b_inv);
  return out;
}

Eigen::MatrixXd random_lower_triangular(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> magnitude(0.5, 1.5);
  std::bernoulli_distribution sign(0.5);
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) b(i, j) = normal(rng);
    b(i, i) = sign(rng) ? magnitude(rng) : -magnitude(rng);
  }
  return b;
}

namespace {

// Exact stand-in for the ordering stage: alpha rows reproduce B * y in a
// valid topological order, and the coefficient matrices are analytic.
OrderingResult population_ordering(const MultiEnvDataset& data, const std::vector<std::size_t>& order,
                                   const CreatorConfig& cfg, std::vector<Eigen::MatrixXd>& B_hat) {
  const auto& ens = *data.ensemble;
  const auto d = static_cast<Eigen::Index>(ens.d());
  Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index r = 0; r < d; ++r) perm(r, static_cast<Eigen::Index>(order[static_cast<std::size_t>(r)])) = 1.0;
  const Eigen::MatrixXd h_pinv = ens.H.completeOrthogonalDecomposition().pseudoInverse();
  Eigen::MatrixXd B = random_lower_triangular(ens.d(), derive_seed(cfg.seed, {0x90B}));
  Eigen::MatrixXd alpha = B * perm * h_pinv;
  const Eigen::VectorXd norms = alpha.rowwise().norm();
  alpha = norms.cwiseInverse().asDiagonal() * alpha;
  B = norms.cwiseInverse().asDiagonal() * B;

  B_hat = population_coefficients(ens, order, B);
  OrderingResult out = replay_ordering(data, alpha);
  // Exact noises follow from the coefficient identity z = B_hat y_tilde.
  for (std::size_t k = 0; k < out.Y_tilde.size(); ++k) out.Z_hat[k] = out.Y_tilde[k] * B_hat[k].transpose();
  out.selection_loss.assign(static_cast<std::size_t>(d), 0.0);
  out.ica_converged.assign(static_cast<std::size_t>(d), true);
  return out;
}

}  // namespace

RecoveryResult fit(const MultiEnvDataset& data, std::size_t d, const CreatorConfig& cfg) {
  cfg.validate();
  data.validate();
  const auto start = Clock::now();
  RecoveryResult result;

  auto t = Clock::now();
  if (cfg.population_mode) {
    if (!data.ensemble) throw StructuralFailure("ordering", "population mode needs the generating ensemble");
    if (data.ensemble->d() != d) throw ConfigError("population mode: d differs from the ensemble");
    if (data.ensemble->K() != data.K()) throw ConfigError("population mode: environment count differs from ensemble");
    const auto order = data.ensemble->dag.topological_order();
    result.ordering = population_ordering(data, order, cfg, result.B_hat);
    result.true_order = order;
  } else {
    result.ordering = subroutine1_order(data, d, cfg);
  }
  result.timings.ordering = seconds_since(t);
  result.warnings = result.ordering.warnings;

  t = Clock::now();
  try {
    if (!cfg.population_mode) {
      result.B_hat = regress_noise_on_features(result.ordering.Z_hat, result.ordering.Y_tilde, cfg.ridge,
                                               &result.regression_fallback);
    }
    if (data.K() < 2) result.warnings.push_back("pruning with K < 2: rank tests are vacuous");
    result.dag_hat = prune_from_coefficients(result.B_hat, cfg.rank_tol());
  } catch (const NumericalFailure& e) {
    throw StructuralFailure("pruning", e.what());
  }
  result.timings.pruning = seconds_since(t);

  t = Clock::now();
  try {
    auto features = apply_disentanglement(result.ordering.Y_tilde,
                                          disentangle_from_coefficients(result.B_hat, result.dag_hat, cfg.rank_tol()));
    result.B_breve = std::move(features.basis.B_breve);
    result.disentangle_fallback = std::move(features.basis.fallback);
    result.y_hat_scale = std::move(features.scale);
    result.Y_hat = std::move(features.Y_hat);
  } catch (const NumericalFailure& e) {
    throw StructuralFailure("disentangling", e.what());
  }
  for (std::size_t i = 0; i < result.disentangle_fallback.size(); ++i) {
    if (result.disentangle_fallback[i]) {
      result.warnings.push_back("empty subspace intersection at position " + std::to_string(i + 1));
    }
  }
  result.timings.disentangling = seconds_since(t);
  result.timings.total = seconds_since(start);
  return result;
}

}  // namespace creator
