#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace creator {

using Adjacency = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Directed acyclic graph over nodes 0..d-1.  Entry (i, j) of the adjacency
/// is true iff the edge i -> j exists.  Acyclicity and the absence of
/// self-loops are checked on construction.
class Dag {
 public:
  Dag() = default;
  explicit Dag(std::size_t d);
  explicit Dag(Adjacency adjacency);

  /// Builds a graph on `d` nodes from an edge list.
  static Dag from_edges(std::size_t d, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

  std::size_t size() const noexcept { return static_cast<std::size_t>(adj_.rows()); }
  const Adjacency& adjacency() const noexcept { return adj_; }
  bool has_edge(std::size_t from, std::size_t to) const { return adj_(from, to); }
  std::size_t edge_count() const;

  std::vector<std::size_t> parents(std::size_t i) const;
  std::vector<std::size_t> children(std::size_t i) const;
  /// Parents j of i with ch(i) a subset of ch(j).
  std::vector<std::size_t> surrounding(std::size_t i) const;
  /// surrounding(i) plus i itself, sorted.
  std::vector<std::size_t> surrounding_closure(std::size_t i) const;

  /// Kahn's algorithm, smallest ready index first.
  std::vector<std::size_t> topological_order() const;
  /// True iff every edge points forward in `order` (order[pos] = node).
  bool is_topological_order(const std::vector<std::size_t>& order) const;

  /// The same graph with node `order[r]` relabelled as r.
  Dag permuted(const std::vector<std::size_t>& order) const;

  friend bool operator==(const Dag& a, const Dag& b) { return a.adj_ == b.adj_; }

 private:
  Adjacency adj_;
};

/// Whether an adjacency matrix describes a DAG without self-loops.
bool is_acyclic(const Adjacency& adjacency);

/// Erdos-Renyi DAG under the fixed order 0..d-1: every pair i < j carries
/// i -> j independently with probability `edge_prob`.
Dag sample_er_dag(std::size_t d, double edge_prob, std::uint64_t seed);

}  // namespace creator
