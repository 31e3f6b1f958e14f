#include "creator/ica.hpp"

#include <cmath>
#include <random>
#include <string>

#include "creator/errors.hpp"

namespace creator {

namespace {

// E[G(nu)] for nu ~ N(0, 1).
constexpr double kLogcoshGaussian = 0.37456720;
constexpr double kQuarticGaussian = 0.75;

Eigen::MatrixXd symmetric_decorrelation(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w * w.transpose());
  if (eig.info() != Eigen::Success) throw NumericalFailure("fast_ica: decorrelation failed");
  const Eigen::VectorXd inv_sqrt = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose() * w;
}

double contrast(const Eigen::MatrixXd& sources, IcaNonlinearity g) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < sources.cols(); ++j) {
    double mean = 0.0;
    if (g == IcaNonlinearity::logcosh) {
      mean = sources.col(j).unaryExpr([](double u) {
        const double a = std::abs(u);
        return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
      }).mean();
      mean -= kLogcoshGaussian;
    } else {
      mean = sources.col(j).array().pow(4).mean() / 4.0 - kQuarticGaussian;
    }
    total += mean * mean;
  }
  return total;
}

struct Run {
  Eigen::MatrixXd w;
  bool converged = false;
  int iterations = 0;
};

Run fixed_point(const Eigen::MatrixXd& white, Eigen::MatrixXd w, const IcaConfig& cfg) {
  const auto n = static_cast<double>(white.rows());
  Run run;
  w = symmetric_decorrelation(w);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Eigen::MatrixXd s = white * w.transpose();
    Eigen::MatrixXd gs(s.rows(), s.cols());
    Eigen::VectorXd mean_dg(s.cols());
    if (cfg.nonlinearity == IcaNonlinearity::logcosh) {
      gs = s.array().tanh().matrix();
      mean_dg = (1.0 - gs.array().square()).colwise().mean().transpose();
    } else {
      gs = s.array().cube().matrix();
      mean_dg = (3.0 * s.array().square()).colwise().mean().transpose();
    }
    Eigen::MatrixXd next = (gs.transpose() * white) / n - mean_dg.asDiagonal() * w;
    next = symmetric_decorrelation(next);
    const double change = ((next * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = std::move(next);
    run.iterations = it;
    if (change < cfg.conv_tol) {
      run.converged = true;
      break;
    }
  }
  run.w = std::move(w);
  return run;
}

}  // namespace

void IcaConfig::validate() const {
  if (max_iter < 1) throw ConfigError("ica: max_iter must be at least 1");
  if (!(conv_tol > 0.0)) throw ConfigError("ica: conv_tol must be positive");
  if (restarts < 1) throw ConfigError("ica: restarts must be at least 1");
}

UnmixingCandidates fast_ica(const Eigen::MatrixXd& x, Eigen::Index n_components, const IcaConfig& cfg,
                            RankTolerance tol) {
  cfg.validate();
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (p < 1 || n <= p) {
    throw ConfigError("fast_ica: need n > p >= 1, got " + std::to_string(n) + "x" + std::to_string(p));
  }
  if (n_components < 1 || n_components > p) throw ConfigError("fast_ica: n_components outside [1, p]");

  const auto wh = whiten(x, n_components, tol);
  const Eigen::Index r = wh.whitened.cols();

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  Run best;
  double best_contrast = -1.0;
  for (int restart = 0; restart < cfg.restarts; ++restart) {
    Eigen::MatrixXd w0 = Eigen::MatrixXd::Identity(r, r);
    if (restart > 0) {
      for (Eigen::Index i = 0; i < w0.size(); ++i) w0.data()[i] = normal(rng);
    }
    Run run = fixed_point(wh.whitened, std::move(w0), cfg);
    const double c = contrast(wh.whitened * run.w.transpose(), cfg.nonlinearity);
    // Prefer converged runs, then the larger contrast.
    const bool better = best_contrast < 0.0 || (run.converged && !best.converged) ||
                        (run.converged == best.converged && c > best_contrast);
    if (better) {
      best = std::move(run);
      best_contrast = c;
    }
  }

  UnmixingCandidates out;
  out.converged = best.converged;
  out.iterations = best.iterations;
  out.contrast = best_contrast;
  out.alpha = best.w * wh.backmap.transpose();
  out.source_scale.resize(r);
  const Eigen::MatrixXd xc = x.rowwise() - wh.mean.transpose();
  for (Eigen::Index j = 0; j < r; ++j) {
    Eigen::VectorXd a = out.alpha.row(j).transpose();
    a.normalize();
    detail::fix_sign(a);
    out.alpha.row(j) = a.transpose();
    const Eigen::VectorXd s = xc * a;
    out.source_scale(j) = std::sqrt(s.squaredNorm() / static_cast<double>(n - 1));
  }
  return out;
}

}  // namespace creator
