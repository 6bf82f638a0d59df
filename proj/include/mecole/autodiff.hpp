#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mecole/matrix.hpp"
#include "mecole/sparse.hpp"

// Minimal reverse-mode differentiation over dense 2-D matrices.
//
// A Tape records every primitive in creation order; Tape::backward walks
// the record in exact reverse, so each node is visited once and fan-out
// gradients are summed before a node propagates to its parents. Every
// forward value is checked for NaN/Inf and a NumericError names the op.
namespace mecole::ad {

class Tape;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;  // empty until a backward pass reaches this parameter
};

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

  Var constant(Matrix value);
  // Differentiable leaf whose gradient is read back with Var::grad().
  Var leaf(Matrix value);
  // Leaf bound to a parameter; backward accumulates into p.grad.
  Var parameter(Parameter& p);

  // Seeds d(loss)/d(loss) = 1 on a 1x1 node and propagates to every leaf.
  void backward(Var loss);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of `id`, zero-initialized on first touch.
  Matrix& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }
  std::size_t last_backward_visits() const { return visits_; }

  // Records an op. `op` names the primitive in error messages.
  Var push(const char* op, Matrix value, std::vector<std::size_t> parents, Backward backward);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

// ---- primitives -------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var div(Var a, Var b);  // elementwise
// a + bias, bias is 1 x cols broadcast over rows
Var add_row(Var a, Var bias);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
// s (1x1) * a
Var scale_by(Var s, Var a);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var abs(Var a);
Var square(Var a);
// clamp with zero gradient outside [lo, hi]
Var clamp(Var a, double lo, double hi);

Var softmax_rows(Var a);
Var sum(Var a);    // 1x1
Var mean(Var a);   // 1x1
Var row_sum(Var a);  // n x 1
Var row_max(Var a);  // n x 1, gradient to the first maximal entry
Var col_sum(Var a);  // 1 x c
Var row_dot(Var a, Var b);  // n x 1, rowwise inner products

// sparse (constant) * dense; `s` must outlive the tape
Var spmm(const SparseMatrix& s, Var x);

Var gather_rows(Var a, std::span<const std::size_t> rows);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(Var a, Var b);
Var select(Var a, std::size_t r, std::size_t c);  // 1x1

// x is N x 1; offsets has B+1 entries delimiting segments. Returns B x 1 of
// log(sum(exp(segment))).
Var segment_logsumexp(Var x, std::span<const std::size_t> offsets);

}  // namespace mecole::ad
