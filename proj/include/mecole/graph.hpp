#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mecole/assignment.hpp"
#include "mecole/matrix.hpp"

namespace mecole {

using NodeId = std::size_t;

struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  double weight = 1.0;
};

// Immutable undirected graph in CSR form. Stored edges are canonical
// (u < v), deduplicated, and never self-loops. Neighbor lists are sorted.
class Graph {
 public:
  Graph() = default;

  // Builds a graph from an arbitrary edge list. Self-loops are dropped and
  // duplicates (in either orientation) merged, keeping the first weight.
  static Graph from_edges(std::size_t n, std::span<const Edge> edges);

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  std::span<const NodeId> neighbors(NodeId u) const {
    return {adj_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  std::span<const double> neighbor_weights(NodeId u) const {
    return {weights_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  std::size_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }

  bool has_edge(NodeId u, NodeId v) const;
  // a_uv; 0 when the pair is not adjacent.
  double weight(NodeId u, NodeId v) const;

  // Same topology, new per-edge weights (parallel to edges()).
  Graph with_weights(std::span<const double> weights) const;

  // Subgraph on `keep` (in the given order); node keep[i] becomes i.
  Graph induced_subgraph(std::span<const NodeId> keep) const;

  // Optional node type tags (e.g. user vs tweet). Empty when absent.
  std::vector<std::string> node_kind;

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adj_;
  std::vector<double> weights_;
};

// Primary graph plus named auxiliary relation graphs sharing its node space.
struct GraphBundle {
  Graph primary;
  std::vector<std::pair<std::string, Graph>> auxiliary;

  void validate() const;
};

// Key attributes per node and the embedding table indexed by token id.
struct AttributeBag {
  std::vector<std::vector<std::size_t>> bags;
  Matrix vocabulary;

  void validate() const;
};

// ---- ingestion ------------------------------------------------------------

Graph parse_edge_list(std::istream& in, std::optional<std::size_t> n_hint = std::nullopt);
Graph load_edge_list(const std::string& path, std::optional<std::size_t> n_hint = std::nullopt);

FeatureMatrix parse_features(std::istream& in, std::size_t n);
FeatureMatrix load_features(const std::string& path, std::size_t n);
// Row count taken from the file.
FeatureMatrix load_features(const std::string& path);

// One integer per line, -1 = unlabeled.
std::vector<int> parse_labels(std::istream& in);
std::vector<int> load_labels(const std::string& path);

AttributeBag parse_attribute_bags(std::istream& bags, std::istream& vocabulary);
AttributeBag load_attribute_bags(const std::string& bags_path, const std::string& vocabulary_path);

// ---- auxiliary graph construction -----------------------------------------

struct KnnStats {
  std::size_t zero_norm_rows = 0;
};

// Cosine k-NN graph: each node proposes its top-k most similar other nodes,
// proposals below eta_sim are dropped, the rest are symmetrized by union.
// Edge weight is the cosine similarity.
Graph build_knn_similarity_graph(const FeatureMatrix& x, std::size_t k, double eta_sim,
                                 KnnStats* stats = nullptr);

// Class-dependent attribute representation from per-class tf-idf scores.
FeatureMatrix tfidf_class_features(const AttributeBag& bags, const Assignment& assignment);

// ---- synthetic graphs -----------------------------------------------------

struct SBMConfig {
  std::vector<std::size_t> block_sizes;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t dep_dim = 8;
  std::size_t inv_dim = 8;
  double noise_sigma = 0.5;
  // Spurious block signal in the class-invariant dims: each node gets a
  // decoy label that is a fixed relabelling of its block with probability
  // `confound_strength`, uniform otherwise, written as a scaled one-hot.
  double confound_strength = 0.0;
  double confound_scale = 2.0;
  // Extra edge probability between nodes of different blocks that share a
  // decoy group, so the decoy also explains part of the topology.
  double confound_p = 0.0;
  std::uint64_t seed = 0;

  std::size_t num_nodes() const;
  void validate() const;
};

struct SbmSample {
  Graph graph;
  FeatureMatrix features;
  std::vector<int> labels;
};

SbmSample generate_sbm(const SBMConfig& cfg);

}  // namespace mecole
