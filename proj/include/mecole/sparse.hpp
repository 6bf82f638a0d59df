#pragma once

#include <cstddef>
#include <vector>

#include "mecole/graph.hpp"
#include "mecole/matrix.hpp"

namespace mecole {

// Row-compressed sparse matrix.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  double at(std::size_t r, std::size_t c) const;
  Matrix to_dense() const;

  // this * x
  Matrix multiply(const Matrix& x) const;
  // this^T * x, without materializing the transpose
  Matrix multiply_transposed(const Matrix& x) const;

  bool is_symmetric(double tol = 0.0) const;
};

// D^-1/2 (A + I) D^-1/2 with D the (weighted) degree matrix of A + I.
SparseMatrix normalize_adjacency(const Graph& g);

// Plain adjacency A (weights as stored), symmetric.
SparseMatrix adjacency_matrix(const Graph& g);

}  // namespace mecole
