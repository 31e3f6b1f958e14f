#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "creator/errors.hpp"
#include "creator/metrics.hpp"
#include "support.hpp"

using namespace creator;
using testing_support::all_dags;
using testing_support::gaussian;

namespace {

// Peel the order front to back; each node must have no parent left unpeeled.
bool valid_order_by_peeling(const Adjacency& a, const std::vector<std::size_t>& order) {
  std::vector<bool> peeled(order.size(), false);
  for (auto node : order) {
    for (std::size_t j = 0; j < order.size(); ++j)
      if (a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(node)) && !peeled[j]) return false;
    peeled[node] = true;
  }
  return true;
}

// R^2 from the normal equations with an explicit intercept column.
double r2_normal_equations(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(y.size(), x.cols() + 1);
  a << Eigen::VectorXd::Ones(y.size()), x;
  const Eigen::VectorXd beta = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  const double ss_res = (y - a * beta).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  return 1.0 - ss_res / ss_tot;
}

Dag fork_with_cover() { return Dag::from_edges(3, {{0, 1}, {0, 2}, {1, 2}}); }

std::vector<Eigen::MatrixXd> latent_envs(std::size_t K, Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t k = 0; k < K; ++k) out.push_back(gaussian(n, d, seed + k));
  return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("shd examples") {
  const Dag empty(2);
  const Dag forward = Dag::from_edges(2, {{0, 1}});
  const Dag backward = Dag::from_edges(2, {{1, 0}});
  CHECK(shd(forward, forward) == 0);
  CHECK(shd(empty, forward) == 1);
  CHECK(shd(backward, forward) == 1);
  CHECK_THROWS_AS(shd(Dag(3), forward), ConfigError);
}

TEST_CASE("d_top examples") {
  const Adjacency chain = Dag::from_edges(2, {{0, 1}}).adjacency();
  CHECK(d_top({0, 1}, chain) == 0);
  CHECK(d_top({1, 0}, chain) == 1);
  const Adjacency complete = fork_with_cover().adjacency();
  CHECK(d_top({2, 1, 0}, complete) == 3);
  CHECK_THROWS_AS(d_top({0, 0, 1}, complete), ConfigError);
  CHECK(positions_from_order({2, 0, 1}) == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("all DAGs up to four nodes") {
  std::size_t total = 0;
  for (int d = 1; d <= 4; ++d) {
    const auto dags = all_dags(d);
    total += dags.size();
    for (const auto& a : dags) {
      CHECK(is_acyclic(a));
      std::vector<std::size_t> order(static_cast<std::size_t>(d));
      std::iota(order.begin(), order.end(), std::size_t{0});
      do {
        const auto pos = positions_from_order(order);
        const bool valid = valid_order_by_peeling(a, order);
        CHECK((d_top(pos, a) == 0) == valid);
      } while (std::next_permutation(order.begin(), order.end()));
    }
    for (const auto& a : dags)
      for (const auto& b : dags) {
        const auto s = shd(Dag(a), Dag(b));
        if (s != testing_support::shd_by_pair_states(a, b)) FAIL("shd differs from the pair-state oracle");
        if (s != shd(Dag(b), Dag(a))) FAIL("shd is not symmetric");
      }
  }
  CHECK(total == 572);
}

TEST_CASE("r_squared agrees with the normal equations") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Eigen::MatrixXd x = gaussian(50, 1 + s % 3, s);
    const Eigen::VectorXd y = x * Eigen::VectorXd::Ones(x.cols()) + gaussian(50, 1, s + 99).col(0) + Eigen::VectorXd::Constant(50, 4.0);
    CHECK(r_squared(y, x) == doctest::Approx(r2_normal_equations(y, x)).epsilon(1e-10));
  }
  bool flag = false;
  CHECK(r_squared(Eigen::VectorXd::Constant(10, 1.5), gaussian(10, 1, 1), &flag) == 0.0);
  CHECK(flag);
}

TEST_CASE("loc_r2 examples") {
  const Dag g = fork_with_cover();  // sur(1) = {0}, sur(2) = {0, 1}
  const auto y = latent_envs(2, 300, 3, 1);

  const auto same = loc_r2(y, y, g);
  CHECK(same.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(same.assignment == std::vector<std::size_t>{0, 1, 2});

  std::vector<Eigen::MatrixXd> doubled;
  for (const auto& m : y) doubled.push_back(2.0 * m);
  CHECK(loc_r2(doubled, y, g).value == doctest::Approx(1.0).epsilon(1e-12));

  // Node 1 has sur(1) = {0}: y1 + y0 is explained by its block.
  const Dag chain = Dag::from_edges(3, {{0, 1}, {1, 2}});
  CHECK(chain.surrounding(1) == std::vector<std::size_t>{});
  CHECK(g.surrounding(1) == std::vector<std::size_t>{0});
  std::vector<Eigen::MatrixXd> mixed;
  for (const auto& m : y) {
    Eigen::MatrixXd e = m;
    e.col(1) = m.col(1) + m.col(0);
    mixed.push_back(e);
  }
  const auto in_block = loc_r2(mixed, y, g);
  CHECK(in_block.per_node[1] == doctest::Approx(1.0).epsilon(1e-10));
  // In the chain node 0 does not surround node 1, so the same mixture scores below 1.
  const auto outside = loc_r2_scores(mixed, y, chain);
  CHECK(outside(1, 1) < 1.0 - 1e-3);
  double expected = 0;
  for (std::size_t k = 0; k < 2; ++k) expected += r2_normal_equations(mixed[k].col(1), y[k].col(1)) / 2.0;
  CHECK(outside(1, 1) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("loc_r2 literal surrounding excludes the node itself") {
  const Dag chain = Dag::from_edges(2, {{0, 1}});
  const auto y = latent_envs(1, 200, 2, 3);
  LocR2Options literal;
  literal.literal_surrounding = true;
  const auto scores = loc_r2_scores(y, y, chain, literal);
  // Root: empty block scores 0; node 1 regressed on y0 alone.
  CHECK(scores(0, 0) == 0.0);
  CHECK(scores(1, 1) == doctest::Approx(r2_normal_equations(y[0].col(1), y[0].col(0))).epsilon(1e-10));
}

TEST_CASE("loc_r2 is invariant to column rescaling, sign flips and permutation") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const std::size_t d = 2 + s % 4;
    const Dag g = sample_er_dag(d, 0.6, s);
    const auto y = latent_envs(2, 200, static_cast<Eigen::Index>(d), 10 * s);
    std::vector<Eigen::MatrixXd> est;
    for (const auto& m : y) est.push_back(m * (Eigen::MatrixXd::Identity(d, d) + 0.3 * gaussian(d, d, s + 500)));
    const auto base = loc_r2(est, y, g);
    CHECK(base.value <= 1.0 + 1e-12);

    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(s);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Eigen::VectorXd scale = (gaussian(d, 1, s + 900).col(0).array().sign() *
                                   (1.0 + gaussian(d, 1, s + 901).col(0).array().abs()))
                                      .matrix();
    std::vector<Eigen::MatrixXd> moved;
    for (const auto& m : est) {
      Eigen::MatrixXd e(m.rows(), m.cols());
      for (std::size_t c = 0; c < d; ++c) e.col(static_cast<Eigen::Index>(perm[c])) = scale(c) * m.col(c);
      moved.push_back(e);
    }
    const auto other = loc_r2(moved, y, g);
    CHECK(other.value == doctest::Approx(base.value).epsilon(1e-9));
  }
}

TEST_CASE("loc_r2 equals 1 exactly when every column lies in its block") {
  const Dag g = fork_with_cover();
  const auto y = latent_envs(2, 300, 3, 7);
  // Column 1 mixes in y2, which is outside the closure of node 1 ({0, 1}).
  std::vector<Eigen::MatrixXd> est;
  for (const auto& m : y) {
    Eigen::MatrixXd e = m;
    e.col(1) += 0.5 * m.col(2);
    est.push_back(e);
  }
  CHECK(loc_r2(est, y, g).value < 1.0 - 1e-4);
  for (std::size_t k = 0; k < 2; ++k) est[k].col(1) = y[k].col(1) + 0.8 * y[k].col(0);
  CHECK(loc_r2(est, y, g).value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("best_assignment ties, exhaustive search and greedy fallback") {
  CHECK(best_assignment(Eigen::MatrixXd::Ones(3, 3)) == std::vector<std::size_t>{0, 1, 2});
  Eigen::Matrix3d s;
  s << 0.1, 0.9, 0.0, 0.8, 0.2, 0.0, 0.0, 0.0, 1.0;
  CHECK(best_assignment(s) == std::vector<std::size_t>{1, 0, 2});

  // Greedy takes 0.9 first and is stuck with a poor remainder; exhaustive does better.
  Eigen::Matrix2d trap;
  trap << 0.9, 0.8, 0.85, 0.0;
  bool greedy = false;
  CHECK(best_assignment(trap, 8, &greedy) == std::vector<std::size_t>{1, 0});
  CHECK_FALSE(greedy);
  CHECK(best_assignment(trap, 1, &greedy) == std::vector<std::size_t>{0, 1});
  CHECK(greedy);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::MatrixXd m = gaussian(5, 5, seed);
    const auto best = best_assignment(m);
    double best_total = 0;
    for (std::size_t i = 0; i < 5; ++i) best_total += m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best[i]));
    std::vector<std::size_t> p(5);
    std::iota(p.begin(), p.end(), std::size_t{0});
    do {
      double t = 0;
      for (std::size_t i = 0; i < 5; ++i) t += m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p[i]));
      CHECK(t <= best_total + 1e-12);
    } while (std::next_permutation(p.begin(), p.end()));
  }
}

TEST_CASE("match_noises undoes a permutation with scaling") {
  const auto z = latent_envs(2, 500, 4, 11);
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  std::vector<Eigen::MatrixXd> z_hat;
  for (const auto& m : z) {
    Eigen::MatrixXd e(m.rows(), 4);
    for (std::size_t i = 0; i < 4; ++i) e.col(static_cast<Eigen::Index>(perm[i])) = -1.7 * m.col(static_cast<Eigen::Index>(i));
    z_hat.push_back(e);
  }
  CHECK(match_noises(z_hat, z) == perm);
}

TEST_CASE("relabel and evaluate_recovery") {
  // Estimated positions: position 0 holds node 1, position 1 holds node 0.
  const Dag over_positions = Dag::from_edges(2, {{0, 1}});
  const Dag relabelled = relabel(over_positions, {1, 0});
  CHECK(relabelled == Dag::from_edges(2, {{1, 0}}));

  const Dag truth = Dag::from_edges(3, {{0, 1}, {1, 2}});
  const auto y = latent_envs(2, 300, 3, 20);
  const auto z = latent_envs(2, 300, 3, 40);
  // Positions in order (2, 0, 1) relative to true nodes.
  const std::vector<std::size_t> node_at = {2, 0, 1};
  std::vector<Eigen::MatrixXd> y_hat, z_hat;
  for (std::size_t k = 0; k < 2; ++k) {
    Eigen::MatrixXd a(300, 3), b(300, 3);
    for (Eigen::Index r = 0; r < 3; ++r) {
      a.col(r) = y[k].col(static_cast<Eigen::Index>(node_at[static_cast<std::size_t>(r)]));
      b.col(r) = z[k].col(static_cast<Eigen::Index>(node_at[static_cast<std::size_t>(r)]));
    }
    y_hat.push_back(a);
    z_hat.push_back(b);
  }
  const Dag est = truth.permuted(node_at);
  const auto by_noise = evaluate_recovery(est, y_hat, z_hat, truth, y, z);
  CHECK(by_noise.matching == "noise");
  CHECK(by_noise.shd == 0);
  CHECK(by_noise.loc_r2 == doctest::Approx(1.0));
  CHECK(by_noise.position_of_node == std::vector<std::size_t>{1, 2, 0});
  CHECK(by_noise.d_top == 1);  // node 2 sits at position 0 before its parent

  const auto by_features = evaluate_recovery(est, y_hat, {}, truth, y, {});
  CHECK(by_features.matching == "features");
  CHECK(by_features.shd == 0);
  CHECK(by_features.position_of_node == by_noise.position_of_node);
}

}  // TEST_SUITE
