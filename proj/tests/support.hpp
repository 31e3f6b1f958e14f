#pragma once

// Shared generators and brute-force reference implementations for tests.
// The references deliberately avoid the library's code paths.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>
#include <unistd.h>

#include "creator/dag.hpp"

namespace testing_support {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Eigen::MatrixXd laplace(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution coin(0.5);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = coin(rng) ? expo(rng) : -expo(rng);
  return m;
}

/// Rank by Gaussian elimination with partial pivoting.
inline Eigen::Index elimination_rank(Eigen::MatrixXd a, double tol = 1e-9) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  Eigen::Index rank = 0;
  for (Eigen::Index c = 0; c < a.cols() && rank < a.rows(); ++c) {
    Eigen::Index pivot = rank;
    for (Eigen::Index r = rank; r < a.rows(); ++r)
      if (std::abs(a(r, c)) > std::abs(a(pivot, c))) pivot = r;
    if (std::abs(a(pivot, c)) <= tol * scale) continue;
    a.row(rank).swap(a.row(pivot));
    for (Eigen::Index r = rank + 1; r < a.rows(); ++r) a.row(r) -= (a(r, c) / a(rank, c)) * a.row(rank);
    ++rank;
  }
  return rank;
}

inline double rbf(double a, double b, double sigma) { return std::exp(-(a - b) * (a - b) / (2 * sigma * sigma)); }

/// tr(K H L H) / (n-1)^2 expanded as
/// sum_ij K_ij L_ij - (2/n) sum_i (sum_j K_ij)(sum_j L_ij) + (sum K)(sum L) / n^2.
inline double hsic_double_sum(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double su, double sv) {
  const auto n = u.size();
  double kl = 0, sum_k = 0, sum_l = 0, cross = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_k = 0, row_l = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double k = rbf(u(i), u(j), su);
      const double l = rbf(v(i), v(j), sv);
      kl += k * l;
      row_k += k;
      row_l += l;
    }
    cross += row_k * row_l;
    sum_k += row_k;
    sum_l += row_l;
  }
  const double dn = static_cast<double>(n);
  return (kl - 2.0 / dn * cross + sum_k * sum_l / (dn * dn)) / ((dn - 1) * (dn - 1));
}

/// Median of all pairwise |a - b| by sorting.
inline double median_distance(const Eigen::VectorXd& x) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = i + 1; j < x.size(); ++j) d.push_back(std::abs(x(i) - x(j)));
  std::sort(d.begin(), d.end());
  const auto m = d.size() / 2;
  return d.size() % 2 ? d[m] : 0.5 * (d[m - 1] + d[m]);
}

/// Acyclicity by repeatedly removing sinks.
inline bool acyclic_by_sink_removal(const creator::Adjacency& a) {
  const auto d = a.rows();
  std::vector<bool> alive(static_cast<std::size_t>(d), true);
  for (Eigen::Index removed = 0; removed < d; ++removed) {
    Eigen::Index sink = -1;
    for (Eigen::Index i = 0; i < d && sink < 0; ++i) {
      if (!alive[static_cast<std::size_t>(i)]) continue;
      bool has_out = false;
      for (Eigen::Index j = 0; j < d; ++j) has_out = has_out || (alive[static_cast<std::size_t>(j)] && a(i, j));
      if (!has_out) sink = i;
    }
    if (sink < 0) return false;
    alive[static_cast<std::size_t>(sink)] = false;
  }
  return true;
}

/// Every labelled DAG on d nodes, by filtering all 2^(d(d-1)) off-diagonal patterns.
inline std::vector<creator::Adjacency> all_dags(int d) {
  std::vector<std::pair<int, int>> slots;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) slots.emplace_back(i, j);
  std::vector<creator::Adjacency> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots.size()); ++mask) {
    creator::Adjacency a = creator::Adjacency::Constant(d, d, false);
    bool two_cycle = false;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (mask >> s & 1) {
        a(slots[s].first, slots[s].second) = true;
        if (a(slots[s].second, slots[s].first)) two_cycle = true;
      }
    }
    if (!two_cycle && acyclic_by_sink_removal(a)) out.push_back(a);
  }
  return out;
}

/// SHD by classifying every unordered pair into {none, forward, backward}.
inline std::size_t shd_by_pair_states(const creator::Adjacency& a, const creator::Adjacency& b) {
  auto state = [](const creator::Adjacency& m, Eigen::Index i, Eigen::Index j) {
    return m(i, j) ? 1 : (m(j, i) ? 2 : 0);
  };
  std::size_t out = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) out += state(a, i, j) != state(b, i, j);
  return out;
}

/// Best mean |corr| over all assignments of recovered to true columns.
inline double best_mean_abs_corr(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& est) {
  const auto d = truth.cols();
  Eigen::MatrixXd c(d, est.cols());
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < est.cols(); ++j) {
      const Eigen::VectorXd a = truth.col(i).array() - truth.col(i).mean();
      const Eigen::VectorXd b = est.col(j).array() - est.col(j).mean();
      c(i, j) = std::abs(a.dot(b)) / std::sqrt(a.squaredNorm() * b.squaredNorm());
    }
  std::vector<int> perm(static_cast<std::size_t>(est.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0;
  do {
    double s = 0;
    for (Eigen::Index i = 0; i < d; ++i) s += c(i, perm[static_cast<std::size_t>(i)]);
    best = std::max(best, s / static_cast<double>(d));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("creator_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
