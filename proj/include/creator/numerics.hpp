#pragma once

// Dense linear-algebra building blocks shared by every stage of the pipeline.
// All functions are templated on the scalar type and take Eigen expressions,
// so callers can pass blocks and maps without copying.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "creator/errors.hpp"

namespace creator {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Relative singular-value threshold in (0, 1).
class RankTolerance {
 public:
  constexpr explicit RankTolerance(double relative = 1e-6) : value_(relative) {
    if (!(relative > 0.0 && relative < 1.0)) {
      throw ConfigError("rank tolerance must lie in (0, 1)");
    }
  }
  constexpr double value() const noexcept { return value_; }

 private:
  double value_;
};

inline constexpr double kPopulationRankTol = 1e-6;

namespace detail {

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericalFailure(std::string(what) + ": non-finite entries in " +
                           shape_string(m.rows(), m.cols()) + " matrix");
  }
}

template <typename Scalar>
Eigen::Index count_above(const VectorX<Scalar>& sv, double rel) {
  if (sv.size() == 0) return 0;
  const Scalar top = sv.maxCoeff();
  if (top <= Scalar(0)) return 0;
  return (sv.array() > Scalar(rel) * top).count();
}

/// Flips `v` so that its first non-negligible entry is positive.
template <typename Scalar>
void fix_sign(VectorX<Scalar>& v) {
  const Scalar scale = v.cwiseAbs().maxCoeff();
  if (scale <= Scalar(0)) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > Scalar(1e-12) * scale) {
      if (v(i) < Scalar(0)) v = -v;
      return;
    }
  }
}

}  // namespace detail

/// Number of singular values above `tol * sigma_max`; zero for the zero matrix.
template <typename Derived>
Eigen::Index svd_rank(const Eigen::MatrixBase<Derived>& m, RankTolerance tol = RankTolerance{}) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) throw DegenerateData("svd_rank: empty matrix");
  detail::require_finite(m, "svd_rank");
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m.eval());
  if (svd.info() != Eigen::Success) {
    throw NumericalFailure("svd_rank: SVD did not converge on " +
                           detail::shape_string(m.rows(), m.cols()) + " matrix");
  }
  return detail::count_above<Scalar>(svd.singularValues(), tol.value());
}

template <typename Scalar>
struct LeastSquaresFit {
  MatrixX<Scalar> coefficients;
  bool used_pseudo_inverse = false;
};

/// Coefficients minimizing |targets - regressors * B|^2 + ridge |B|^2.
///
/// With ridge == 0 a numerically singular Gram matrix triggers the
/// minimum-norm solution, reported through `used_pseudo_inverse`.
template <typename DerivedA, typename DerivedB>
LeastSquaresFit<typename DerivedA::Scalar> least_squares(const Eigen::MatrixBase<DerivedA>& regressors,
                                                         const Eigen::MatrixBase<DerivedB>& targets,
                                                         double ridge = 0.0) {
  using Scalar = typename DerivedA::Scalar;
  if (regressors.rows() < 1 || regressors.cols() < 1) {
    throw ConfigError("least_squares: need at least one sample and one regressor");
  }
  if (regressors.rows() != targets.rows()) {
    throw ConfigError("least_squares: sample counts differ (" + std::to_string(regressors.rows()) +
                      " vs " + std::to_string(targets.rows()) + ")");
  }
  if (ridge < 0.0) throw ConfigError("least_squares: ridge must be nonnegative");

  MatrixX<Scalar> gram = regressors.transpose() * regressors;
  const MatrixX<Scalar> cross = regressors.transpose() * targets;
  if (ridge > 0.0) gram.diagonal().array() += Scalar(ridge);

  LeastSquaresFit<Scalar> fit;
  Eigen::LLT<MatrixX<Scalar>> llt(gram);
  const Scalar gram_scale = gram.diagonal().cwiseAbs().maxCoeff();
  const bool well_posed = llt.info() == Eigen::Success && gram_scale > Scalar(0) &&
                          llt.rcond() > Scalar(1e-12);
  if (well_posed) {
    fit.coefficients = llt.solve(cross);
  } else {
    Eigen::CompleteOrthogonalDecomposition<MatrixX<Scalar>> cod(regressors.eval());
    const Scalar max_abs = regressors.cwiseAbs().maxCoeff();
    cod.setThreshold(Scalar(1e-10));
    if (max_abs <= Scalar(0)) {
      fit.coefficients = MatrixX<Scalar>::Zero(regressors.cols(), targets.cols());
    } else {
      fit.coefficients = cod.solve(targets.eval());
    }
    fit.used_pseudo_inverse = true;
  }
  return fit;
}

/// X minus its least-squares projection onto the columns of Z.  An empty Z
/// returns X unchanged.
template <typename DerivedX, typename DerivedZ>
MatrixX<typename DerivedX::Scalar> residualize(const Eigen::MatrixBase<DerivedX>& x,
                                               const Eigen::MatrixBase<DerivedZ>& z,
                                               bool* used_pseudo_inverse = nullptr) {
  if (used_pseudo_inverse) *used_pseudo_inverse = false;
  if (z.cols() == 0) return x.eval();
  if (z.rows() != x.rows()) throw ConfigError("residualize: sample counts differ");
  auto fit = least_squares(z, x, 0.0);
  if (used_pseudo_inverse) *used_pseudo_inverse = fit.used_pseudo_inverse;
  return x - z * fit.coefficients;
}

/// Column-centered copy.
template <typename Derived>
MatrixX<typename Derived::Scalar> center_columns(const Eigen::MatrixBase<Derived>& x) {
  return x.rowwise() - x.colwise().mean();
}

template <typename Scalar>
struct Whitening {
  MatrixX<Scalar> whitened;  ///< n x r, identity sample covariance
  MatrixX<Scalar> backmap;   ///< p x r, whitened = centered(X) * backmap
  VectorX<Scalar> mean;      ///< column means removed before whitening
};

/// PCA whitening to r = min(target_rank, numerical rank of centered X).
/// Sample covariance uses the 1/(n-1) normalization.
template <typename Derived>
Whitening<typename Derived::Scalar> whiten(const Eigen::MatrixBase<Derived>& x, Eigen::Index target_rank,
                                           RankTolerance tol = RankTolerance{}) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 2 || p < 1) throw DegenerateData("whiten: need n >= 2 and p >= 1");
  if (target_rank < 1 || target_rank > std::min(n, p)) {
    throw ConfigError("whiten: target rank " + std::to_string(target_rank) + " outside [1, min(n, p)]");
  }
  detail::require_finite(x, "whiten");

  Whitening<Scalar> out;
  out.mean = x.colwise().mean().transpose();
  const MatrixX<Scalar> xc = x.rowwise() - out.mean.transpose();
  const MatrixX<Scalar> cov = (xc.transpose() * xc) / Scalar(n - 1);

  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw NumericalFailure("whiten: eigen-decomposition failed on " + detail::shape_string(p, p) +
                           " covariance");
  }
  // Eigenvalues ascend; singular values of xc are sqrt((n-1) * lambda).
  const VectorX<Scalar> lambda = eig.eigenvalues().reverse().cwiseMax(Scalar(0));
  const VectorX<Scalar> sv = lambda.cwiseSqrt();
  const Eigen::Index rank = std::min<Eigen::Index>(target_rank, detail::count_above<Scalar>(sv, tol.value()));
  if (rank == 0) throw DegenerateData("whiten: data has zero rank after centering");

  const MatrixX<Scalar> vecs = eig.eigenvectors().rowwise().reverse().leftCols(rank);
  out.backmap = vecs * lambda.head(rank).cwiseSqrt().cwiseInverse().asDiagonal();
  out.whitened = xc * out.backmap;
  return out;
}

/// Orthogonal projector onto the span of the rows of `vectors`, using the
/// leading `rank` right singular vectors.
template <typename Derived>
MatrixX<typename Derived::Scalar> orthonormal_projector(const Eigen::MatrixBase<Derived>& vectors,
                                                        Eigen::Index rank) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index dim = vectors.cols();
  if (rank < 0 || rank > dim) throw ConfigError("orthonormal_projector: rank out of range");
  if (rank == 0) return MatrixX<Scalar>::Zero(dim, dim);
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(vectors.eval(), Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericalFailure("orthonormal_projector: SVD did not converge");
  const MatrixX<Scalar> basis = svd.matrixV().leftCols(rank);
  return basis * basis.transpose();
}

/// Orthogonal projector onto the span of the rows of `vectors`, rank decided
/// by `tol`.
template <typename Derived>
MatrixX<typename Derived::Scalar> orthonormal_projector(const Eigen::MatrixBase<Derived>& vectors,
                                                        RankTolerance tol = RankTolerance{}) {
  using Scalar = typename Derived::Scalar;
  if (vectors.size() == 0 || vectors.cwiseAbs().maxCoeff() <= Scalar(0)) {
    throw DegenerateData("orthonormal_projector: all vectors are zero");
  }
  return orthonormal_projector(vectors, svd_rank(vectors, tol));
}

template <typename Scalar>
struct MinSingular {
  VectorX<Scalar> vector;
  Scalar value;
};

/// Unit right-singular vector for the smallest singular value.  When the
/// matrix has fewer rows than columns the null space counts as singular value
/// zero.  Ties resolve to the last-indexed vector; sign makes the first
/// non-negligible entry positive.
template <typename Derived>
MinSingular<typename Derived::Scalar> min_singular(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) throw DegenerateData("min_singular_vector: empty matrix");
  detail::require_finite(m, "min_singular_vector");
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m.eval(), Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) {
    throw NumericalFailure("min_singular_vector: SVD did not converge on " +
                           detail::shape_string(m.rows(), m.cols()) + " matrix");
  }
  const Eigen::Index cols = m.cols();
  MinSingular<Scalar> out;
  out.vector = svd.matrixV().col(cols - 1);
  const auto& sv = svd.singularValues();
  out.value = sv.size() < cols ? Scalar(0) : sv(cols - 1);
  detail::fix_sign(out.vector);
  return out;
}

template <typename Derived>
VectorX<typename Derived::Scalar> min_singular_vector(const Eigen::MatrixBase<Derived>& m) {
  return min_singular(m).vector;
}

/// Pearson correlation of two equally long vectors; zero if either is constant.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar correlation(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const VectorX<Scalar> ac = a.array() - a.mean();
  const VectorX<Scalar> bc = b.array() - b.mean();
  const Scalar den = std::sqrt(ac.squaredNorm() * bc.squaredNorm());
  if (!(den > Scalar(0))) return Scalar(0);
  return ac.dot(bc) / den;
}

}  // namespace creator
