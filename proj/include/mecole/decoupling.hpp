#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mecole/assignment.hpp"
#include "mecole/autodiff.hpp"
#include "mecole/graph.hpp"
#include "mecole/nn.hpp"
#include "mecole/sparse.hpp"

namespace mecole::decouple {

using ad::Tape;
using ad::Var;

// Class-dependent (hd) and class-invariant (ho) node embeddings.
// ho has zero columns when decoupling is disabled.
struct DecoupledEmbeddings {
  Matrix hd;
  Matrix ho;

  std::size_t num_nodes() const { return hd.rows(); }
  bool has_invariant() const { return ho.cols() > 0; }
  void validate() const;
};

// The same embeddings as tape variables. `ho` is default-constructed
// (tape == nullptr) when decoupling is disabled.
struct EmbeddingVars {
  Var hd;
  Var ho;

  bool has_invariant() const { return ho.tape != nullptr && ho.cols() > 0; }
  DecoupledEmbeddings values() const;
};

enum class DiscrepancyMetric { l1, l2, cosine, linf };

DiscrepancyMetric parse_metric(const std::string& name);
std::string to_string(DiscrepancyMetric m);

// d(a, b). Cosine is the cosine distance 1 - cos(a, b).
double discrepancy(DiscrepancyMetric metric, std::span<const double> a, std::span<const double> b);

// ---- encoder ----------------------------------------------------------------

struct EncoderConfig {
  std::size_t hidden = 64;
  std::size_t dim_d = 16;
  std::size_t dim_o = 32;
  bool decouple = true;
};

// Adjacency channels seen by the two towers. The dependent tower reads the
// rewired primary graph, the invariant tower the raw one; both read every
// auxiliary channel. Pointers must outlive any tape built from them.
struct EncoderInputs {
  const Matrix* features = nullptr;
  const SparseMatrix* dependent_primary = nullptr;
  const SparseMatrix* invariant_primary = nullptr;
  std::vector<const SparseMatrix*> auxiliary;
};

// Two independent 2-layer GCNs producing hd and ho.
class DecoupledEncoder {
 public:
  DecoupledEncoder(nn::ParameterStore& store, std::size_t in_dim, std::size_t aux_channels,
                   const EncoderConfig& cfg, std::mt19937_64& rng);

  EmbeddingVars forward(Tape& tape, const EncoderInputs& inputs) const;
  // Same as forward, values only.
  DecoupledEmbeddings encode(const EncoderInputs& inputs) const;

  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  nn::GcnTower dependent_;
  nn::GcnTower invariant_;
};

// ---- link prediction ----------------------------------------------------------

struct LinkProbability {
  double z = 0.0;
  double z_d = 0.0;
  double z_o = 0.0;
};

// Z = sigmoid(hd_u . hd_v) * sigmoid(ho_u . ho_v). Without invariant
// features z_o is fixed at 1.
LinkProbability predict_link(std::span<const double> hd_u, std::span<const double> hd_v,
                             std::span<const double> ho_u, std::span<const double> ho_v);
LinkProbability predict_link(NodeId u, NodeId v, const DecoupledEmbeddings& e);

// Perceptron scorer over [hd_u, hd_v, ho_u, ho_v] used by the MLP ablation.
class MlpLinkHead {
 public:
  MlpLinkHead(nn::ParameterStore& store, std::size_t dim_d, std::size_t dim_o, std::size_t hidden,
              std::mt19937_64& rng);
  // One probability per row of the gathered inputs.
  Var forward(Tape& tape, Var hd_u, Var hd_v, Var ho_u, Var ho_v) const;

 private:
  ad::Parameter* w1_;
  ad::Parameter* b1_;
  ad::Parameter* w2_;
  ad::Parameter* b2_;
  bool has_invariant_;
};

// ---- losses -------------------------------------------------------------------

struct NodePair {
  NodeId u = 0;
  NodeId v = 0;
};

// `count` uniform non-adjacent pairs (u != v, sampled with replacement).
// Throws DataError when the graph has no non-edge.
std::vector<NodePair> sample_non_edges(const Graph& g, std::size_t count, std::mt19937_64& rng);

// Graph-autoencoder BCE over every edge (label 1) and neg_ratio * |E| sampled
// non-edges (label 0). Probabilities are clipped to [1e-7, 1 - 1e-7].
Var reconstruction_loss(const Graph& g, const EmbeddingVars& e, std::size_t neg_ratio, std::mt19937_64& rng,
                        const MlpLinkHead* head = nullptr);

// Same loss on an explicit set of negative pairs.
Var reconstruction_loss(const Graph& g, const EmbeddingVars& e, std::span<const NodePair> negatives,
                        const MlpLinkHead* head = nullptr);

// Cross-class pairs for the discrepancy objective: a class pair is picked
// uniformly among distinct non-empty classes, then one node from each.
std::vector<NodePair> sample_cross_class_pairs(const Assignment& a, std::size_t pairs, std::mt19937_64& rng);

// mean over pairs of d(ho_1, ho_2) / (d(hd_1, hd_2) + 1e-8).
Var discrepancy_loss(const EmbeddingVars& e, std::span<const NodePair> pairs, DiscrepancyMetric metric);
Var discrepancy_loss(const EmbeddingVars& e, const Assignment& a, DiscrepancyMetric metric, std::size_t pairs,
                     std::mt19937_64& rng);

// ---- rewiring -----------------------------------------------------------------

// Primary topology reweighted by e_d = min(eta, e / max(sigmoid(ho_i . ho_j), 1e-8)).
struct RewiredGraph {
  Graph graph;
  double eta = 0.0;
};

RewiredGraph rewire(const Graph& g, const Matrix& ho, double eta);

}  // namespace mecole::decouple
