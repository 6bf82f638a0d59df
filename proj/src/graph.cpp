#include "mecole/graph.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "mecole/error.hpp"

namespace mecole {

Graph Graph::from_edges(std::size_t n, std::span<const Edge> edges) {
  Graph g;
  g.n_ = n;
  std::vector<Edge> canon;
  canon.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u >= n || e.v >= n) {
      throw DataError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                      ") out of range for n=" + std::to_string(n));
    }
    if (e.u == e.v) continue;
    canon.push_back(e.u < e.v ? e : Edge{e.v, e.u, e.weight});
  }
  // stable so the first occurrence of a duplicate keeps its weight
  std::stable_sort(canon.begin(), canon.end(), [](const Edge& a, const Edge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  auto last = std::unique(canon.begin(), canon.end(),
                          [](const Edge& a, const Edge& b) { return a.u == b.u && a.v == b.v; });
  canon.erase(last, canon.end());
  g.edges_ = std::move(canon);

  std::vector<std::size_t> deg(n, 0);
  for (const Edge& e : g.edges_) {
    ++deg[e.u];
    ++deg[e.v];
  }
  g.offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + deg[i];
  g.adj_.resize(g.offsets_[n]);
  g.weights_.resize(g.offsets_[n]);
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (const Edge& e : g.edges_) {
    g.adj_[cursor[e.u]] = e.v;
    g.weights_[cursor[e.u]++] = e.weight;
    g.adj_[cursor[e.v]] = e.u;
    g.weights_[cursor[e.v]++] = e.weight;
  }
  // rows must be sorted for has_edge/weight lookups
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = g.offsets_[i];
    const std::size_t len = g.offsets_[i + 1] - b;
    std::vector<std::pair<NodeId, double>> row(len);
    for (std::size_t j = 0; j < len; ++j) row[j] = {g.adj_[b + j], g.weights_[b + j]};
    std::sort(row.begin(), row.end());
    for (std::size_t j = 0; j < len; ++j) {
      g.adj_[b + j] = row[j].first;
      g.weights_[b + j] = row[j].second;
    }
  }
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

double Graph::weight(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  auto it = std::lower_bound(nb.begin(), nb.end(), v);
  if (it == nb.end() || *it != v) return 0.0;
  return neighbor_weights(u)[static_cast<std::size_t>(it - nb.begin())];
}

Graph Graph::with_weights(std::span<const double> weights) const {
  if (weights.size() != edges_.size()) throw DataError("with_weights: weight count mismatch");
  std::vector<Edge> e = edges_;
  for (std::size_t i = 0; i < e.size(); ++i) e[i].weight = weights[i];
  Graph g = from_edges(n_, e);
  g.node_kind = node_kind;
  return g;
}

Graph Graph::induced_subgraph(std::span<const NodeId> keep) const {
  std::vector<std::size_t> remap(n_, n_);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] >= n_) throw DataError("induced_subgraph: node out of range");
    remap[keep[i]] = i;
  }
  std::vector<Edge> sub;
  for (const Edge& e : edges_) {
    if (remap[e.u] < n_ && remap[e.v] < n_) sub.push_back({remap[e.u], remap[e.v], e.weight});
  }
  Graph g = from_edges(keep.size(), sub);
  if (!node_kind.empty()) {
    for (NodeId v : keep) g.node_kind.push_back(node_kind[v]);
  }
  return g;
}

void GraphBundle::validate() const {
  for (const auto& [name, g] : auxiliary) {
    if (g.num_nodes() != primary.num_nodes()) {
      throw DataError("auxiliary graph '" + name + "' has " + std::to_string(g.num_nodes()) +
                      " nodes, primary has " + std::to_string(primary.num_nodes()));
    }
  }
}

void AttributeBag::validate() const {
  for (std::size_t i = 0; i < bags.size(); ++i) {
    for (std::size_t t : bags[i]) {
      if (t >= vocabulary.rows()) {
        throw DataError("attribute bag of node " + std::to_string(i) + " references token " +
                        std::to_string(t) + " with no embedding");
      }
    }
  }
}

}  // namespace mecole
