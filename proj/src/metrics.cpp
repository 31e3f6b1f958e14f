#include "creator/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "creator/errors.hpp"
#include "creator/numerics.hpp"

namespace creator {

std::size_t shd(const Dag& estimated, const Dag& truth) {
  if (estimated.size() != truth.size()) throw ConfigError("shd: graphs differ in size");
  const auto& a = estimated.adjacency();
  const auto& b = truth.adjacency();
  std::size_t out = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j)
      if (a(i, j) != b(i, j) || a(j, i) != b(j, i)) ++out;
  return out;
}

std::vector<std::size_t> positions_from_order(const std::vector<std::size_t>& order) {
  std::vector<std::size_t> pos(order.size(), order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (order[r] >= order.size() || pos[order[r]] != order.size()) throw ConfigError("order is not a permutation");
    pos[order[r]] = r;
  }
  return pos;
}

std::size_t d_top(const std::vector<std::size_t>& position, const Adjacency& truth) {
  if (static_cast<Eigen::Index>(position.size()) != truth.rows()) throw ConfigError("d_top: size mismatch");
  positions_from_order(position);  // validates the bijection
  std::size_t out = 0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i)
    for (Eigen::Index j = 0; j < truth.cols(); ++j)
      if (truth(i, j) && position[static_cast<std::size_t>(i)] > position[static_cast<std::size_t>(j)]) ++out;
  return out;
}

double r_squared(const Eigen::VectorXd& target, const Eigen::MatrixXd& regressors, bool* zero_variance) {
  const Eigen::VectorXd t = target.array() - target.mean();
  const double total = t.squaredNorm();
  const double scale = target.cwiseAbs().maxCoeff();
  if (!(total > 1e-24 * std::max(1.0, scale * scale) * static_cast<double>(target.size()))) {
    if (zero_variance) *zero_variance = true;
    return 0.0;
  }
  if (regressors.cols() == 0) return 0.0;
  const Eigen::MatrixXd rc = center_columns(regressors);
  const Eigen::VectorXd resid = residualize(Eigen::MatrixXd(t), rc).col(0);
  return 1.0 - resid.squaredNorm() / total;
}

Eigen::MatrixXd loc_r2_scores(const std::vector<Eigen::MatrixXd>& Y_hat, const std::vector<Eigen::MatrixXd>& Y_true,
                              const Dag& truth, const LocR2Options& opts, bool* zero_variance) {
  if (Y_hat.size() != Y_true.size() || Y_hat.empty()) throw ConfigError("loc_r2: environment counts differ");
  const auto d = static_cast<Eigen::Index>(truth.size());
  for (std::size_t k = 0; k < Y_hat.size(); ++k) {
    if (Y_hat[k].cols() != d || Y_true[k].cols() != d || Y_hat[k].rows() != Y_true[k].rows()) {
      throw ConfigError("loc_r2: shape mismatch in env " + std::to_string(k));
    }
  }
  Eigen::MatrixXd score = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto block = opts.literal_surrounding ? truth.surrounding(static_cast<std::size_t>(i))
                                                : truth.surrounding_closure(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < Y_hat.size(); ++k) {
      Eigen::MatrixXd reg(Y_true[k].rows(), static_cast<Eigen::Index>(block.size()));
      for (std::size_t b = 0; b < block.size(); ++b)
        reg.col(static_cast<Eigen::Index>(b)) = Y_true[k].col(static_cast<Eigen::Index>(block[b]));
      for (Eigen::Index c = 0; c < d; ++c) score(i, c) += r_squared(Y_hat[k].col(c), reg, zero_variance);
    }
  }
  return score / static_cast<double>(Y_hat.size());
}

std::vector<std::size_t> best_assignment(const Eigen::MatrixXd& score, std::size_t exhaustive_limit, bool* greedy) {
  const auto d = static_cast<std::size_t>(score.rows());
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (greedy) *greedy = d > exhaustive_limit;
  if (d <= exhaustive_limit) {
    auto total = [&](const std::vector<std::size_t>& p) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += score(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p[i]));
      return s;
    };
    std::vector<std::size_t> best = perm;
    double best_total = total(perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
      const double t = total(perm);
      if (t > best_total) {
        best_total = t;
        best = perm;
      }
    }
    return best;
  }
  // Greedy: repeatedly take the largest remaining entry.
  std::vector<bool> row_used(d, false), col_used(d, false);
  for (std::size_t step = 0; step < d; ++step) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bc = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (row_used[i]) continue;
      for (std::size_t c = 0; c < d; ++c) {
        if (col_used[c]) continue;
        const double v = score(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        if (v > best) {
          best = v;
          bi = i;
          bc = c;
        }
      }
    }
    row_used[bi] = col_used[bc] = true;
    perm[bi] = bc;
  }
  return perm;
}

LocR2Result loc_r2(const std::vector<Eigen::MatrixXd>& Y_hat, const std::vector<Eigen::MatrixXd>& Y_true,
                   const Dag& truth, const LocR2Options& opts) {
  LocR2Result out;
  const Eigen::MatrixXd score = loc_r2_scores(Y_hat, Y_true, truth, opts, &out.zero_variance);
  out.assignment = best_assignment(score, opts.exhaustive_limit, &out.greedy);
  for (std::size_t i = 0; i < out.assignment.size(); ++i) {
    out.per_node.push_back(score(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out.assignment[i])));
  }
  out.value = out.per_node.empty()
                  ? 0.0
                  : std::accumulate(out.per_node.begin(), out.per_node.end(), 0.0) /
                        static_cast<double>(out.per_node.size());
  return out;
}

std::vector<std::size_t> match_noises(const std::vector<Eigen::MatrixXd>& Z_hat,
                                      const std::vector<Eigen::MatrixXd>& Z_true) {
  if (Z_hat.size() != Z_true.size() || Z_hat.empty()) throw ConfigError("match_noises: environment counts differ");
  const Eigen::Index d = Z_true.front().cols();
  Eigen::MatrixXd score = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < Z_hat.size(); ++k) {
    if (Z_hat[k].cols() != d || Z_hat[k].rows() != Z_true[k].rows()) throw ConfigError("match_noises: shape mismatch");
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index c = 0; c < d; ++c) {
        const double r = correlation(Eigen::VectorXd(Z_true[k].col(i)), Eigen::VectorXd(Z_hat[k].col(c)));
        score(i, c) += std::isfinite(r) ? std::abs(r) : 0.0;
      }
  }
  return best_assignment(score / static_cast<double>(Z_hat.size()));
}

Dag relabel(const Dag& over_positions, const std::vector<std::size_t>& assignment) {
  const auto d = over_positions.size();
  if (assignment.size() != d) throw ConfigError("relabel: size mismatch");
  const auto node_at = positions_from_order(assignment);  // node_at[position] = node
  Adjacency adj = Adjacency::Constant(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), false);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      if (over_positions.has_edge(a, b))
        adj(static_cast<Eigen::Index>(node_at[a]), static_cast<Eigen::Index>(node_at[b])) = true;
  return Dag(std::move(adj));
}

MetricsReport evaluate_recovery(const Dag& estimated_over_positions, const std::vector<Eigen::MatrixXd>& Y_hat,
                                const std::vector<Eigen::MatrixXd>& Z_hat, const Dag& truth,
                                const std::vector<Eigen::MatrixXd>& Y_true,
                                const std::vector<Eigen::MatrixXd>& Z_true, const LocR2Options& opts) {
  if (estimated_over_positions.size() != truth.size()) throw ConfigError("evaluate: graph sizes differ");
  MetricsReport report;
  const auto lr = loc_r2(Y_hat, Y_true, truth, opts);
  report.loc_r2 = lr.value;
  report.best_permutation = lr.assignment;
  report.per_node_loc_r2 = lr.per_node;
  report.zero_variance = lr.zero_variance;
  report.greedy = lr.greedy;
  if (!Z_hat.empty() && !Z_true.empty()) {
    report.position_of_node = match_noises(Z_hat, Z_true);
    report.matching = "noise";
  } else {
    report.position_of_node = lr.assignment;
    report.matching = "features";
  }
  report.shd = shd(relabel(estimated_over_positions, report.position_of_node), truth);
  report.d_top = d_top(report.position_of_node, truth.adjacency());
  return report;
}

}  // namespace creator
