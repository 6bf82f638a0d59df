#include "mecole/sparse.hpp"

#include <algorithm>
#include <cmath>

#include "mecole/error.hpp"

namespace mecole {

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto b = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
  auto e = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
  auto it = std::lower_bound(b, e, c);
  if (it == e || *it != c) return 0.0;
  return values[static_cast<std::size_t>(it - col_idx.begin())];
}

Matrix SparseMatrix::to_dense() const {
  Matrix d(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) d(r, col_idx[p]) = values[p];
  return d;
}

Matrix SparseMatrix::multiply(const Matrix& x) const {
  if (x.rows() != cols) throw NumericError("spmm: shape mismatch");
  Matrix y(rows, x.cols());
  const std::size_t w = x.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double* out = y.data().data() + r * w;
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
      const double v = values[p];
      const double* in = x.data().data() + col_idx[p] * w;
      for (std::size_t c = 0; c < w; ++c) out[c] += v * in[c];
    }
  }
  return y;
}

Matrix SparseMatrix::multiply_transposed(const Matrix& x) const {
  if (x.rows() != rows) throw NumericError("spmm^T: shape mismatch");
  Matrix y(cols, x.cols());
  const std::size_t w = x.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * w;
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
      const double v = values[p];
      double* out = y.data().data() + col_idx[p] * w;
      for (std::size_t c = 0; c < w; ++c) out[c] += v * in[c];
    }
  }
  return y;
}

bool SparseMatrix::is_symmetric(double tol) const {
  if (rows != cols) return false;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
      if (std::abs(values[p] - at(col_idx[p], r)) > tol) return false;
  return true;
}

namespace {

SparseMatrix from_graph(const Graph& g, bool self_loops) {
  const std::size_t n = g.num_nodes();
  SparseMatrix s;
  s.rows = s.cols = n;
  s.row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto nb = g.neighbors(i);
    auto wt = g.neighbor_weights(i);
    bool placed_self = !self_loops;
    for (std::size_t j = 0; j < nb.size(); ++j) {
      if (!placed_self && nb[j] > i) {
        s.col_idx.push_back(i);
        s.values.push_back(1.0);
        placed_self = true;
      }
      s.col_idx.push_back(nb[j]);
      s.values.push_back(wt[j]);
    }
    if (!placed_self) {
      s.col_idx.push_back(i);
      s.values.push_back(1.0);
    }
    s.row_ptr[i + 1] = s.col_idx.size();
  }
  return s;
}

}  // namespace

SparseMatrix adjacency_matrix(const Graph& g) { return from_graph(g, false); }

SparseMatrix normalize_adjacency(const Graph& g) {
  SparseMatrix s = from_graph(g, true);
  std::vector<double> inv_sqrt(s.rows);
  for (std::size_t r = 0; r < s.rows; ++r) {
    double d = 0.0;
    for (std::size_t p = s.row_ptr[r]; p < s.row_ptr[r + 1]; ++p) d += s.values[p];
    if (!(d > 0.0)) throw NumericError("normalize_adjacency: non-positive degree (negative edge weights?)");
    inv_sqrt[r] = 1.0 / std::sqrt(d);
  }
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t p = s.row_ptr[r]; p < s.row_ptr[r + 1]; ++p)
      s.values[p] *= inv_sqrt[r] * inv_sqrt[s.col_idx[p]];
  return s;
}

}  // namespace mecole
