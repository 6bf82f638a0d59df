#pragma once

#include <cstddef>
#include <vector>

#include "mecole/matrix.hpp"

namespace mecole {

// Soft class assignment R (n x K, rows on the simplex) plus a per-node
// relevance flag. Irrelevant nodes still carry an assignment row but are
// skipped by anchor sampling, tf-idf documents and discrepancy pairs.
struct Assignment {
  Matrix R;
  std::vector<bool> relevant;

  std::size_t num_nodes() const { return R.rows(); }
  std::size_t num_classes() const { return R.cols(); }

  // argmax of row i; ties resolve to the lowest class index.
  int hard(std::size_t i) const;
  std::vector<int> hard_labels() const;

  // Members of each class under argmax, optionally restricted to relevant nodes.
  std::vector<std::vector<std::size_t>> class_members(bool relevant_only = true) const;

  // Throws NumericError unless every row lies on the simplex (tolerance 1e-6).
  void validate() const;

  static Assignment from_hard(const std::vector<int>& labels, std::size_t k);
};

}  // namespace mecole
