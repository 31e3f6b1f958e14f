#include "doctest.h"

#include <algorithm>

#include "creator/errors.hpp"
#include "creator/hsic.hpp"
#include "creator/numerics.hpp"
#include "support.hpp"

using namespace creator;
using testing_support::gaussian;

TEST_SUITE("hsic") {

TEST_CASE("median_bandwidth examples") {
  Eigen::MatrixXd two(2, 1);
  two << 0, 2;
  CHECK(median_bandwidth(two).value == doctest::Approx(2.0));
  Eigen::MatrixXd three(3, 1);
  three << 0, 1, 2;
  CHECK(median_bandwidth(three).value == doctest::Approx(1.0));
  const auto same = median_bandwidth(Eigen::MatrixXd::Constant(5, 1, 3.0));
  CHECK(same.degenerate);
  CHECK(same.value == 1.0);

  // |N(0,2)| has median sqrt(2) * Phi^{-1}(0.75).
  const Eigen::MatrixXd big = gaussian(10000, 1, 1);
  CHECK(std::abs(median_bandwidth(big).value / (0.6744897501960817 * std::sqrt(2.0)) - 1.0) < 0.1);

  for (std::uint64_t s = 0; s < 10; ++s) {
    const Eigen::VectorXd v = gaussian(41 + static_cast<int>(s), 1, s).col(0);
    CHECK(median_bandwidth(v).value == doctest::Approx(testing_support::median_distance(v)).epsilon(1e-12));
  }
}

TEST_CASE("trace formula equals the explicit double sum") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const int n = 4 + static_cast<int>(s % 47);
    const Eigen::VectorXd u = gaussian(n, 1, s).col(0);
    const Eigen::VectorXd v = (u.array().square() + gaussian(n, 1, s + 1000).col(0).array()).matrix();
    HsicConfig cfg;
    cfg.subsample.reset();
    const double su = median_bandwidth(u, cfg.seed).value;
    const double sv = median_bandwidth(v, cfg.seed).value;
    CHECK(std::abs(hsic_biased(u, v, cfg).value - testing_support::hsic_double_sum(u, v, su, sv)) <= 1e-10);
  }
}

TEST_CASE("fixed bandwidths are honoured") {
  const Eigen::VectorXd u = gaussian(30, 1, 1).col(0);
  const Eigen::VectorXd v = gaussian(30, 1, 2).col(0) + u;
  HsicConfig cfg;
  cfg.bandwidth = HsicConfig::Bandwidth::fixed;
  cfg.fixed_bandwidth_u = 0.7;
  cfg.fixed_bandwidth_v = 1.9;
  CHECK(hsic_biased(u, v, cfg).value ==
        doctest::Approx(testing_support::hsic_double_sum(u, v, 0.7, 1.9)).epsilon(1e-10));
}

TEST_CASE("independent pairs stay small; identical pairs are at least ten times larger") {
  int small = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Eigen::VectorXd u = gaussian(500, 1, 2 * t).col(0);
    const Eigen::VectorXd v = gaussian(500, 1, 2 * t + 1).col(0);
    small += hsic_biased(u, v, HsicConfig{}).value < 0.01;
  }
  CHECK(small >= 95);

  std::vector<double> ratio;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const Eigen::VectorXd u = gaussian(500, 1, 500 + 2 * t).col(0);
    const Eigen::VectorXd v = gaussian(500, 1, 501 + 2 * t).col(0);
    ratio.push_back(hsic_biased(u, u, HsicConfig{}).value / hsic_biased(u, v, HsicConfig{}).value);
  }
  std::nth_element(ratio.begin(), ratio.begin() + 10, ratio.end());
  CHECK(ratio[10] >= 10.0);
}

TEST_CASE("symmetry, shift invariance, nonnegativity") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Eigen::VectorXd u = gaussian(60, 1, s).col(0);
    const Eigen::VectorXd v = (u.array().abs() + gaussian(60, 1, s + 7).col(0).array()).matrix();
    HsicConfig cfg;
    const double a = hsic_biased(u, v, cfg).value;
    CHECK(a == doctest::Approx(hsic_biased(v, u, cfg).value).epsilon(1e-10));
    const Eigen::VectorXd us = (u.array() + 5.0).matrix();
    const Eigen::VectorXd vs = (v.array() - 3.0).matrix();
    CHECK(std::abs(hsic_biased(us, vs, cfg).value - a) < 1e-10);
    CHECK(a >= 0.0);
  }
}

TEST_CASE("constant inputs are degenerate and score zero") {
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(20, 2.0);
  const Eigen::VectorXd v = gaussian(20, 1, 1).col(0);
  const auto h = hsic_biased(u, v, HsicConfig{});
  CHECK(h.value == 0.0);
  CHECK(h.degenerate);
  CHECK(hsic_biased(v, u, HsicConfig{}).degenerate);
}

TEST_CASE("subsampling and configuration") {
  const Eigen::VectorXd u = gaussian(800, 1, 3).col(0);
  const Eigen::VectorXd v = gaussian(800, 1, 4).col(0) + u;
  HsicConfig cfg;
  cfg.subsample = 100;
  cfg.seed = 5;
  // Same as evaluating directly on the chosen rows.
  const auto rows = subsample_rows(800, 100, 5);
  CHECK(rows.size() == 100);
  CHECK(std::is_sorted(rows.begin(), rows.end()));
  Eigen::VectorXd us(100), vs(100);
  for (int i = 0; i < 100; ++i) us(i) = u(rows[i]), vs(i) = v(rows[i]);
  HsicConfig full = cfg;
  full.subsample.reset();
  CHECK(hsic_biased(u, v, cfg).value == doctest::Approx(hsic_biased(us, vs, full).value).epsilon(1e-12));
  CHECK(hsic_biased(u, v, cfg).value == hsic_biased(u, v, cfg).value);

  HsicConfig bad;
  bad.subsample = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(hsic_biased(u.head(3), v.head(3), HsicConfig{}), ConfigError);
  CHECK_THROWS_AS(hsic_biased(u, v.head(10), HsicConfig{}), ConfigError);
}

TEST_CASE("evaluator agrees with the one-shot estimator on vector arguments") {
  const Eigen::VectorXd u = gaussian(40, 1, 8).col(0);
  const Eigen::MatrixXd v = gaussian(40, 2, 9);
  HsicConfig cfg;
  const HsicEvaluator eval(u, cfg);
  CHECK(eval(v).value == doctest::Approx(hsic_biased(u, v, cfg).value).epsilon(1e-12));
  // Brute force with the full Gram matrices.
  const double su = median_bandwidth(u).value, sv = median_bandwidth(v).value;
  const Eigen::MatrixXd k = rbf_gram(u, su), l = rbf_gram(v, sv);
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(40, 40) - Eigen::MatrixXd::Constant(40, 40, 1.0 / 40);
  CHECK(eval(v).value == doctest::Approx((k * h * l * h).trace() / (39.0 * 39.0)).epsilon(1e-10));
}

}  // TEST_SUITE
