#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "mecole/assignment.hpp"
#include "mecole/autodiff.hpp"
#include "mecole/decoupling.hpp"
#include "mecole/graph.hpp"

namespace mecole::contrast {

using decouple::DecoupledEmbeddings;

// Counterfactual copy of an anchor: invariant features kept, a random
// subset of class-dependent dims replaced by a donor from another class.
struct VirtualNode {
  std::vector<double> hd;
  std::vector<double> ho;
  NodeId anchor = 0;
  NodeId donor = 0;
  std::vector<bool> mask;  // true = dim taken from donor
};

struct ContrastiveBatch {
  NodeId anchor = 0;
  std::vector<NodeId> positives;
  std::vector<double> positive_probs;
  std::vector<NodeId> negatives;
  std::vector<double> negative_probs;
  double tau = 0.5;
};

// Throws DataError if the batch breaks the neighborhood invariants
// (positives inside N_v, negatives outside N_v and != v, probabilities
// normalized).
void validate_batch(const ContrastiveBatch& batch, const Graph& g);

// ---- anchors ------------------------------------------------------------------

// exp(-r^2 / (2 s^2)) for the given members of class k, normalized to sum
// to 1; s is the std of r_ik over the members, floored at 1e-3.
std::vector<double> anchor_weights(const Assignment& a, std::size_t k, std::span<const NodeId> members);

// Up to per_class relevant nodes per class, weighted toward low confidence,
// drawn without replacement.
std::vector<NodeId> sample_anchors(const Assignment& a, std::size_t per_class, std::mt19937_64& rng);

// ---- virtual nodes ----------------------------------------------------------------

VirtualNode blend(NodeId anchor, NodeId donor, std::vector<bool> mask, const DecoupledEmbeddings& e);

// Bernoulli(p_ce) per dependent dim, redrawn until at least one dim is set.
std::vector<bool> draw_mask(std::size_t dims, double p_ce, std::mt19937_64& rng);

VirtualNode synthesize_virtual_node(NodeId anchor, const Assignment& a, const DecoupledEmbeddings& e, double p_ce,
                                    std::mt19937_64& rng);

// ---- sampling -----------------------------------------------------------------

struct NegativeSample {
  std::vector<NodeId> nodes;
  std::vector<double> probs;
};

// The anchor's candidate pool: the top `pool_size` non-neighbors u (u != v)
// ranked by mean Z(virtual, u) over the given virtual nodes. Scores are
// returned alongside, ordered best first.
NegativeSample negative_candidates(std::span<const VirtualNode> virt, const DecoupledEmbeddings& e, const Graph& g,
                                   std::size_t pool_size);

// m draws without replacement from the candidate pool with probability
// proportional to Z; returned probabilities are the drawn Z renormalized.
NegativeSample sample_negatives(std::span<const VirtualNode> virt, const DecoupledEmbeddings& e, const Graph& g,
                                std::size_t m, std::size_t pool_size, std::mt19937_64& rng);
NegativeSample sample_negatives(const VirtualNode& virt, const DecoupledEmbeddings& e, const Graph& g,
                                std::size_t m, std::mt19937_64& rng);

// Ablation: m distinct uniform non-neighbors of v.
NegativeSample sample_uniform_negatives(NodeId v, const Graph& g, std::size_t m, std::mt19937_64& rng);

// `count` neighbors of v drawn uniformly with replacement (P_p = 1/d_v).
std::vector<NodeId> sample_positives(NodeId v, const Graph& g, std::size_t count, std::mt19937_64& rng);

// ---- loss -----------------------------------------------------------------------

// Mean over batches and positives of
//   -log( exp(f(v).f(u+)/tau) / sum_k exp(f(v).f(u-_k)/tau) ),  f = hd row.
// The denominator holds negatives only unless include_positive is set
// (standard InfoNCE).
ad::Var contrastive_loss(std::span<const ContrastiveBatch> batches, ad::Var hd, bool include_positive = false);

}  // namespace mecole::contrast
