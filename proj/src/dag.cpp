#include "creator/dag.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "creator/errors.hpp"

namespace creator {

Dag::Dag(std::size_t d) : adj_(Adjacency::Constant(d, d, false)) {}

Dag::Dag(Adjacency adjacency) : adj_(std::move(adjacency)) {
  if (adj_.rows() != adj_.cols()) throw ConfigError("Dag: adjacency must be square");
  if (!is_acyclic(adj_)) throw ConfigError("Dag: adjacency contains a cycle or self-loop");
}

Dag Dag::from_edges(std::size_t d, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Adjacency a = Adjacency::Constant(d, d, false);
  for (auto [from, to] : edges) {
    if (from >= d || to >= d) throw ConfigError("Dag: edge endpoint out of range");
    a(from, to) = true;
  }
  return Dag(std::move(a));
}

std::size_t Dag::edge_count() const { return static_cast<std::size_t>(adj_.count()); }

std::vector<std::size_t> Dag::parents(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < size(); ++j)
    if (adj_(j, i)) out.push_back(j);
  return out;
}

std::vector<std::size_t> Dag::children(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < size(); ++j)
    if (adj_(i, j)) out.push_back(j);
  return out;
}

std::vector<std::size_t> Dag::surrounding(std::size_t i) const {
  std::vector<std::size_t> out;
  const auto ch_i = children(i);
  for (auto j : parents(i)) {
    const bool covers = std::all_of(ch_i.begin(), ch_i.end(), [&](std::size_t c) { return adj_(j, c); });
    if (covers) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> Dag::surrounding_closure(std::size_t i) const {
  auto out = surrounding(i);
  out.push_back(i);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> Dag::topological_order() const {
  const std::size_t d = size();
  std::vector<std::size_t> indegree(d, 0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (adj_(i, j)) ++indegree[j];
  std::vector<std::size_t> order;
  std::vector<bool> done(d, false);
  while (order.size() < d) {
    std::size_t next = d;
    for (std::size_t i = 0; i < d; ++i) {
      if (!done[i] && indegree[i] == 0) {
        next = i;
        break;
      }
    }
    if (next == d) throw ConfigError("Dag: graph has a cycle");
    done[next] = true;
    order.push_back(next);
    for (std::size_t j = 0; j < d; ++j)
      if (adj_(next, j)) --indegree[j];
  }
  return order;
}

bool Dag::is_topological_order(const std::vector<std::size_t>& order) const {
  const std::size_t d = size();
  if (order.size() != d) return false;
  std::vector<std::size_t> pos(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    if (order[r] >= d || pos[order[r]] != d) return false;
    pos[order[r]] = r;
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (adj_(i, j) && pos[i] > pos[j]) return false;
  return true;
}

Dag Dag::permuted(const std::vector<std::size_t>& order) const {
  const std::size_t d = size();
  if (order.size() != d) throw ConfigError("Dag::permuted: order has wrong length");
  Adjacency a(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t s = 0; s < d; ++s) a(r, s) = adj_(order[r], order[s]);
  return Dag(std::move(a));
}

bool is_acyclic(const Adjacency& adjacency) {
  const auto d = static_cast<std::size_t>(adjacency.rows());
  if (adjacency.cols() != adjacency.rows()) return false;
  for (std::size_t i = 0; i < d; ++i)
    if (adjacency(i, i)) return false;
  // Repeatedly strip nodes without incoming edges from the remaining set.
  std::vector<bool> removed(d, false);
  for (std::size_t round = 0; round < d; ++round) {
    bool progress = false;
    for (std::size_t i = 0; i < d; ++i) {
      if (removed[i]) continue;
      bool has_incoming = false;
      for (std::size_t j = 0; j < d && !has_incoming; ++j) has_incoming = !removed[j] && adjacency(j, i);
      if (!has_incoming) {
        removed[i] = true;
        progress = true;
      }
    }
    if (!progress) break;
  }
  return std::all_of(removed.begin(), removed.end(), [](bool r) { return r; });
}

Dag sample_er_dag(std::size_t d, double edge_prob, std::uint64_t seed) {
  if (d < 1) throw ConfigError("sample_er_dag: d must be at least 1");
  if (!(edge_prob > 0.0 && edge_prob <= 1.0)) throw ConfigError("sample_er_dag: edge_prob must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(edge_prob);
  Adjacency a = Adjacency::Constant(d, d, false);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) a(i, j) = coin(rng);
  return Dag(std::move(a));
}

}  // namespace creator
