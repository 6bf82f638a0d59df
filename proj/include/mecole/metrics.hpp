#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mecole::metrics {

// Maximum-weight perfect matching on a square matrix (Kuhn-Munkres).
// Returns col[row].
std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<double>>& weight);

// Fraction of agreeing nodes under the best one-to-one relabelling of
// predicted clusters. Nodes with truth < 0 are unlabeled and ignored.
double clustering_accuracy(std::span<const int> pred, std::span<const int> truth);

// Normalized mutual information, arithmetic-mean normalization. Returns 0
// when either labelling has a single cluster. Unlabeled truth entries
// (< 0) are ignored.
double nmi(std::span<const int> pred, std::span<const int> truth);

}  // namespace mecole::metrics
