#pragma once

// Undirected overlay topology with uniform (non-preferential) attachment
// growth and churn. Node ids are handed out by a monotone counter and never
// reused.

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ulsim {

using NodeId = std::uint32_t;

struct TopologyParams {
  int N = 10000;  // target node count
  int N0 = 5;     // initial clique size
  int m = 3;      // links per joining node

  void validate() const {
    if (N0 < 2) throw std::invalid_argument("topology: N0 must be >= 2");
    if (N < N0) throw std::invalid_argument("topology: N must be >= N0");
    if (m < 1 || m > N0) throw std::invalid_argument("topology: m must be in [1, N0]");
  }
};

class OverlayGraph {
 public:
  NodeId add_node() {
    const auto id = static_cast<NodeId>(adj_.size());
    adj_.emplace_back();
    alive_.push_back(true);
    alive_pos_.push_back(alive_list_.size());
    alive_list_.push_back(id);
    return id;
  }

  void connect(NodeId a, NodeId b) {
    if (a == b) throw std::invalid_argument("overlay: self-loop");
    require_alive(a);
    require_alive(b);
    if (has_edge(a, b)) return;
    adj_[a].push_back(b);
    adj_[b].push_back(a);
  }

  bool has_edge(NodeId a, NodeId b) const {
    if (a >= adj_.size()) return false;
    const auto& v = adj_[a];
    return std::find(v.begin(), v.end(), b) != v.end();
  }

  // Drops the node and every incident edge. Neighbors are not rewired.
  void remove_node(NodeId id) {
    require_alive(id);
    for (NodeId nb : adj_[id]) {
      auto& v = adj_[nb];
      v.erase(std::find(v.begin(), v.end(), id));
    }
    adj_[id].clear();
    adj_[id].shrink_to_fit();
    alive_[id] = false;
    const std::size_t pos = alive_pos_[id];
    const NodeId last = alive_list_.back();
    alive_list_[pos] = last;
    alive_pos_[last] = pos;
    alive_list_.pop_back();
  }

  bool alive(NodeId id) const { return id < alive_.size() && alive_[id]; }
  const std::vector<NodeId>& neighbors(NodeId id) const { return adj_.at(id); }
  std::size_t degree(NodeId id) const { return adj_.at(id).size(); }

  // Ids ever issued, including departed nodes.
  std::size_t id_bound() const { return adj_.size(); }
  std::size_t alive_count() const { return alive_list_.size(); }
  // Alive ids in unspecified order.
  const std::vector<NodeId>& alive_nodes() const { return alive_list_; }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (NodeId id : alive_list_) twice += adj_[id].size();
    return twice / 2;
  }

  /// Symmetric, no self-loops, no parallel edges, every endpoint alive.
  bool check_invariants() const {
    for (NodeId a = 0; a < adj_.size(); ++a) {
      const auto& v = adj_[a];
      if (!alive_[a] && !v.empty()) return false;
      auto sorted = v;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
      for (NodeId b : v) {
        if (b == a || !alive(b)) return false;
        const auto& w = adj_[b];
        if (std::find(w.begin(), w.end(), a) == w.end()) return false;
      }
    }
    return alive_list_.size() == static_cast<std::size_t>(std::count(alive_.begin(), alive_.end(), true));
  }

  bool connected() const {
    if (alive_list_.empty()) return true;
    std::vector<char> seen(adj_.size(), 0);
    std::vector<NodeId> stack{alive_list_.front()};
    seen[stack.back()] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : adj_[u]) {
        if (seen[v]) continue;
        seen[v] = 1;
        ++reached;
        stack.push_back(v);
      }
    }
    return reached == alive_list_.size();
  }

  /// One edge per line, "a,b" with a < b, lines in ascending order.
  void write_edges(std::ostream& os) const {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId a = 0; a < adj_.size(); ++a)
      for (NodeId b : adj_[a])
        if (a < b) edges.emplace_back(a, b);
    std::sort(edges.begin(), edges.end());
    for (auto [a, b] : edges) os << a << ',' << b << '\n';
  }

 private:
  void require_alive(NodeId id) const {
    if (!alive(id)) throw std::out_of_range("overlay: unknown node id " + std::to_string(id));
  }

  std::vector<std::vector<NodeId>> adj_;
  std::vector<bool> alive_;
  std::vector<std::size_t> alive_pos_;
  std::vector<NodeId> alive_list_;
};

namespace detail {

// k distinct values from pool, uniformly, without replacement.
template <class Rng>
std::vector<NodeId> sample_distinct(const std::vector<NodeId>& pool, int k, Rng& rng) {
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(k));
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  while (out.size() < static_cast<std::size_t>(k)) {
    const NodeId c = pool[pick(rng)];
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// Attaches a fresh node to m distinct alive nodes chosen uniformly.
template <class Rng>
NodeId join(OverlayGraph& g, int m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("join: m must be >= 1");
  if (g.alive_count() < static_cast<std::size_t>(m))
    throw std::invalid_argument("join: fewer than m alive nodes");
  const auto targets = detail::sample_distinct(g.alive_nodes(), m, rng);
  const NodeId id = g.add_node();
  for (NodeId t : targets) g.connect(id, t);
  return id;
}

inline void leave(OverlayGraph& g, NodeId id) { g.remove_node(id); }

/// N0-clique, then N-N0 nodes each attached to m existing nodes with even
/// probability.
template <class Rng>
OverlayGraph generate(const TopologyParams& p, Rng& rng) {
  p.validate();
  OverlayGraph g;
  for (int i = 0; i < p.N0; ++i) g.add_node();
  for (NodeId a = 0; a < static_cast<NodeId>(p.N0); ++a)
    for (NodeId b = a + 1; b < static_cast<NodeId>(p.N0); ++b) g.connect(a, b);
  for (int i = p.N0; i < p.N; ++i) join(g, p.m, rng);
  return g;
}

}  // namespace ulsim
