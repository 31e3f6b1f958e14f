#include "creator/hsic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "creator/errors.hpp"
#include "creator/seeding.hpp"

namespace creator {

namespace {

constexpr std::size_t kBandwidthCap = 1000;

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

Eigen::MatrixXd double_center(Eigen::MatrixXd k) {
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double grand = row_mean.mean();
  k.colwise() -= row_mean;
  k.rowwise() -= col_mean;
  k.array() += grand;
  return k;
}

}  // namespace

void HsicConfig::validate() const {
  if (subsample && *subsample < 10) throw ConfigError("hsic: subsample must be at least 10");
  if (bandwidth == Bandwidth::fixed && !(fixed_bandwidth_u > 0.0 && fixed_bandwidth_v > 0.0)) {
    throw ConfigError("hsic: fixed bandwidths must be positive");
  }
}

bool is_constant(const Eigen::MatrixXd& sample) {
  if (sample.size() == 0) return true;
  for (Eigen::Index j = 0; j < sample.cols(); ++j) {
    const double lo = sample.col(j).minCoeff();
    const double hi = sample.col(j).maxCoeff();
    const double mag = std::max(std::abs(lo), std::abs(hi));
    if (hi - lo > 1e-12 * mag && hi - lo > 0.0) return false;
  }
  return true;
}

std::vector<Eigen::Index> subsample_rows(Eigen::Index n, std::size_t cap, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (static_cast<std::size_t>(n) <= cap) return idx;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Bandwidth median_bandwidth(const Eigen::MatrixXd& points, std::uint64_t seed) {
  const auto rows = subsample_rows(points.rows(), kBandwidthCap, derive_seed(seed, {0xBA4D}));
  const Eigen::MatrixXd pts = rows.size() == static_cast<std::size_t>(points.rows()) ? points : select_rows(points, rows);
  const Eigen::Index m = pts.rows();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a + 1; b < m; ++b) dist.push_back((pts.row(a) - pts.row(b)).norm());
  if (dist.empty()) return {1.0, true};
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  if (!(median > 0.0)) return {1.0, true};
  return {median, false};
}

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& points, double sigma) {
  const Eigen::Index n = points.rows();
  const double scale = -1.0 / (2.0 * sigma * sigma);
  Eigen::MatrixXd g(n, n);
  if (points.cols() == 1) {
    const auto x = points.col(0);
    for (Eigen::Index b = 0; b < n; ++b) {
      g(b, b) = 1.0;
      for (Eigen::Index a = b + 1; a < n; ++a) {
        const double diff = x(a) - x(b);
        g(a, b) = g(b, a) = std::exp(scale * diff * diff);
      }
    }
    return g;
  }
  for (Eigen::Index b = 0; b < n; ++b) {
    g(b, b) = 1.0;
    for (Eigen::Index a = b + 1; a < n; ++a) {
      g(a, b) = g(b, a) = std::exp(scale * (points.row(a) - points.row(b)).squaredNorm());
    }
  }
  return g;
}

HsicEvaluator::HsicEvaluator(const Eigen::VectorXd& u, const HsicConfig& cfg) : cfg_(cfg), n_(u.size()) {
  cfg_.validate();
  if (n_ < 4) throw ConfigError("hsic: need at least 4 samples");
  if (is_constant(u)) {
    degenerate_ = true;
    return;
  }
  const double sigma =
      cfg_.bandwidth == HsicConfig::Bandwidth::fixed ? cfg_.fixed_bandwidth_u : median_bandwidth(u, cfg_.seed).value;
  centered_gram_ = double_center(rbf_gram(u, sigma));
}

HsicValue HsicEvaluator::operator()(const Eigen::MatrixXd& v) const {
  if (v.rows() != n_) throw ConfigError("hsic: sample lengths differ");
  if (degenerate_ || is_constant(v)) return {0.0, true};
  const double sigma =
      cfg_.bandwidth == HsicConfig::Bandwidth::fixed ? cfg_.fixed_bandwidth_v : median_bandwidth(v, cfg_.seed).value;
  const double scale = -1.0 / (2.0 * sigma * sigma);
  // tr(K H L H) = sum_ab (HKH)_ab L_ab; L is symmetric with unit diagonal.
  double acc = centered_gram_.trace();
  for (Eigen::Index b = 0; b < n_; ++b) {
    double col = 0.0;
    for (Eigen::Index a = b + 1; a < n_; ++a) {
      const double l = v.cols() == 1 ? std::exp(scale * (v(a, 0) - v(b, 0)) * (v(a, 0) - v(b, 0)))
                                     : std::exp(scale * (v.row(a) - v.row(b)).squaredNorm());
      col += centered_gram_(a, b) * l;
    }
    acc += 2.0 * col;
  }
  const double denom = static_cast<double>(n_ - 1) * static_cast<double>(n_ - 1);
  return {std::max(0.0, acc / denom), false};
}

HsicValue hsic_biased(const Eigen::VectorXd& u, const Eigen::MatrixXd& v, const HsicConfig& cfg) {
  if (u.size() != v.rows()) throw ConfigError("hsic: sample lengths differ");
  if (u.size() < 4) throw ConfigError("hsic: need at least 4 samples");
  if (cfg.subsample && static_cast<std::size_t>(u.size()) > *cfg.subsample) {
    const auto rows = subsample_rows(u.size(), *cfg.subsample, cfg.seed);
    const Eigen::VectorXd us = select_rows(u, rows);
    return HsicEvaluator(us, cfg)(select_rows(v, rows));
  }
  return HsicEvaluator(u, cfg)(v);
}

}  // namespace creator
