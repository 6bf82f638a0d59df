#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mecole/assignment.hpp"
#include "mecole/autodiff.hpp"
#include "mecole/graph.hpp"
#include "mecole/sparse.hpp"

namespace mecole::cluster {

// Newman modularity of a hard labelling, computed per cluster:
//   Q = sum_c [ e_c / m - (d_c / 2m)^2 ]
// with e_c the intra-cluster edge weight and d_c the cluster degree sum.
double modularity(const Graph& g, std::span<const int> labels);

// (1/2m) tr(C^T B C) for a soft assignment C.
double soft_modularity(const Graph& g, const Matrix& c);

struct ModularityInitConfig {
  std::size_t epochs = 300;
  double lr = 0.01;
  double collapse_weight = 1.0;
  std::size_t hidden = 64;
};

// Precomputed graph terms of the modularity objective.
struct ModularityTerms {
  SparseMatrix adjacency;
  Matrix degrees;  // 1 x n
  double two_m = 0.0;

  explicit ModularityTerms(const Graph& g);
};

// -(1/2m) tr(C^T B C) + collapse_weight * (sqrt(K)/n * ||sum_i C_i||_2 - 1)
ad::Var modularity_objective(const ModularityTerms& terms, ad::Var c, double collapse_weight);

// Soft assignments from a GCN + softmax head trained on the modularity
// objective. Every node starts relevant. Throws NumericError on divergence.
Assignment init_assignments(const GraphBundle& bundle, const FeatureMatrix& x, std::size_t k,
                            const ModularityInitConfig& cfg, std::uint64_t seed);

struct UpdateOptions {
  double q = 0.5;                // fraction of most confident nodes per class used as pseudo-labels
  double relevance_floor = -1.0;  // < 0 means 1.2 / K
  double l2 = 1e-4;
  std::size_t steps = 200;
};

// One-vs-rest logistic regressors refit on hd every update. A class with
// no pseudo-labels keeps its previous regressor (zero, i.e. uniform scores,
// before its first fit).
class AssignmentUpdater {
 public:
  AssignmentUpdater(std::size_t k, UpdateOptions opts = {});

  // No access to the graph: the update sees only class-dependent features.
  Assignment update(const Matrix& hd, const Assignment& prev);

  const UpdateOptions& options() const { return opts_; }
  double relevance_floor() const;

 private:
  std::size_t k_;
  UpdateOptions opts_;
  Matrix weights_;  // K x (dim + 1), last column is the bias
};

Assignment update_assignments(const Matrix& hd, const Assignment& prev, double q, double relevance_floor);

// CSV rows: node_id,argmax,r_0..r_{K-1},relevant
void export_assignment_csv(const Assignment& a, std::ostream& out);

}  // namespace mecole::cluster
