#include "mecole/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mecole/error.hpp"

namespace mecole::ad {

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::grad() const { return tape->grad(id); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw NumericError("scalar(): node is not 1x1");
  return v(0, 0);
}

Var Tape::constant(Matrix value) { return push("constant", std::move(value), {}, nullptr); }

Var Tape::leaf(Matrix value) {
  Var v = push("leaf", std::move(value), {}, nullptr);
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Tape::parameter(Parameter& p) {
  Var v = leaf(p.value);
  nodes_[v.id].param = &p;
  return v;
}

Matrix& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::push(const char* op, Matrix value, std::vector<std::size_t> parents, Backward backward) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  Node n;
  n.value = std::move(value);
  for (std::size_t p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw NumericError("backward: variable belongs to another tape");
  const Matrix& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) throw NumericError("backward: loss must be 1x1");
  for (Node& n : nodes_) n.grad = Matrix();
  grad_buffer(loss.id)(0, 0) = 1.0;
  visits_ = 0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    ++visits_;
    if (n.backward) n.backward(*this, n.grad);
    if (!n.grad.all_finite()) throw NumericError("non-finite gradient at tape node " + std::to_string(i));
  }
  for (Node& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    Parameter& p = *n.param;
    if (p.grad.empty()) {
      p.grad = n.grad;
    } else {
      for (std::size_t k = 0; k < p.grad.size(); ++k) p.grad.data()[k] += n.grad.data()[k];
    }
  }
}

namespace {

void require_same(const char* op, const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) {
    throw NumericError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()) + ")");
  }
}

// Adds f(k) * upstream into the gradient buffer of `id` elementwise.
template <typename F>
void accumulate(Tape& t, std::size_t id, const Matrix& g, F&& f) {
  if (!t.requires_grad(id)) return;
  Matrix& buf = t.grad_buffer(id);
  for (std::size_t k = 0; k < g.size(); ++k) buf.data()[k] += g.data()[k] * f(k);
}

void accumulate_matrix(Tape& t, std::size_t id, const Matrix& m) {
  if (!t.requires_grad(id)) return;
  Matrix& buf = t.grad_buffer(id);
  for (std::size_t k = 0; k < m.size(); ++k) buf.data()[k] += m.data()[k];
}

template <typename F, typename D>
Var unary(const char* op, Var a, F&& fwd, D&& deriv) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t k = 0; k < av.size(); ++k) out.data()[k] = fwd(av.data()[k]);
  const std::size_t ai = a.id;
  // deriv(x, y) receives the input and output values
  return a.tape->push(op, std::move(out), {ai}, [ai, deriv, self = a.tape->size()](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(ai);
    const Matrix& y = t.value(self);
    accumulate(t, ai, g, [&](std::size_t k) { return deriv(x.data()[k], y.data()[k]); });
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw NumericError("matmul: shape mismatch");
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->push("matmul", mecole::matmul(a.value(), b.value()), {ai, bi}, [ai, bi](Tape& t, const Matrix& g) {
    if (t.requires_grad(ai)) accumulate_matrix(t, ai, mecole::matmul(g, t.value(bi).transposed()));
    if (t.requires_grad(bi)) accumulate_matrix(t, bi, mecole::matmul(t.value(ai).transposed(), g));
  });
}

Var add(Var a, Var b) {
  require_same("add", a, b);
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] += b.value().data()[k];
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->push("add", std::move(out), {ai, bi}, [ai, bi](Tape& t, const Matrix& g) {
    accumulate_matrix(t, ai, g);
    accumulate_matrix(t, bi, g);
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a, b);
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] -= b.value().data()[k];
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->push("sub", std::move(out), {ai, bi}, [ai, bi](Tape& t, const Matrix& g) {
    accumulate_matrix(t, ai, g);
    accumulate(t, bi, g, [](std::size_t) { return -1.0; });
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a, b);
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] *= b.value().data()[k];
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->push("mul", std::move(out), {ai, bi}, [ai, bi](Tape& t, const Matrix& g) {
    const Matrix& av = t.value(ai);
    const Matrix& bv = t.value(bi);
    accumulate(t, ai, g, [&](std::size_t k) { return bv.data()[k]; });
    accumulate(t, bi, g, [&](std::size_t k) { return av.data()[k]; });
  });
}

Var div(Var a, Var b) {
  require_same("div", a, b);
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] /= b.value().data()[k];
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->push("div", std::move(out), {ai, bi}, [ai, bi](Tape& t, const Matrix& g) {
    const Matrix& av = t.value(ai);
    const Matrix& bv = t.value(bi);
    accumulate(t, ai, g, [&](std::size_t k) { return 1.0 / bv.data()[k]; });
    accumulate(t, bi, g, [&](std::size_t k) {
      const double d = bv.data()[k];
      return -av.data()[k] / (d * d);
    });
  });
}

Var add_row(Var a, Var bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw NumericError("add_row: bias must be 1 x cols");
  Matrix out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bias.value()(0, c);
  const std::size_t ai = a.id, bi = bias.id;
  return a.tape->push("add_row", std::move(out), {ai, bi}, [ai, bi](Tape& t, const Matrix& g) {
    accumulate_matrix(t, ai, g);
    if (t.requires_grad(bi)) {
      Matrix& buf = t.grad_buffer(bi);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) buf(0, c) += g(r, c);
    }
  });
}

Var scale(Var a, double c) {
  return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary("add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var scale_by(Var s, Var a) {
  if (s.rows() != 1 || s.cols() != 1) throw NumericError("scale_by: scale must be 1x1");
  const double c = s.value()(0, 0);
  Matrix out = a.value();
  for (double& x : out.data()) x *= c;
  const std::size_t si = s.id, ai = a.id;
  return a.tape->push("scale_by", std::move(out), {si, ai}, [si, ai](Tape& t, const Matrix& g) {
    const double cv = t.value(si)(0, 0);
    const Matrix& av = t.value(ai);
    accumulate(t, ai, g, [cv](std::size_t) { return cv; });
    if (t.requires_grad(si)) {
      double acc = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) acc += g.data()[k] * av.data()[k];
      t.grad_buffer(si)(0, 0) += acc;
    }
  });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
  return unary("sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var abs(Var a) {
  return unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var softmax_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto row = av.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += (out(r, c) = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < row.size(); ++c) out(r, c) /= s;
  }
  const std::size_t ai = a.id;
  return a.tape->push("softmax_rows", std::move(out), {ai}, [ai, self = a.tape->size()](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self);
    Matrix& buf = t.grad_buffer(ai);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gy = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) gy += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) buf(r, c) += y(r, c) * (g(r, c) - gy);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const std::size_t ai = a.id;
  return a.tape->push("sum", Matrix(1, 1, s), {ai}, [ai](Tape& t, const Matrix& g) {
    const double gv = g(0, 0);
    Matrix& buf = t.grad_buffer(ai);
    for (double& x : buf.data()) x += gv;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw NumericError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var row_sum(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (double x : av.row(r)) out(r, 0) += x;
  const std::size_t ai = a.id;
  return a.tape->push("row_sum", std::move(out), {ai}, [ai](Tape& t, const Matrix& g) {
    Matrix& buf = t.grad_buffer(ai);
    for (std::size_t r = 0; r < buf.rows(); ++r)
      for (std::size_t c = 0; c < buf.cols(); ++c) buf(r, c) += g(r, 0);
  });
}

Var row_max(Var a) {
  const Matrix& av = a.value();
  if (av.cols() == 0) throw NumericError("row_max: no columns");
  Matrix out(av.rows(), 1);
  std::vector<std::size_t> arg(av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto row = av.row(r);
    arg[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    out(r, 0) = row[arg[r]];
  }
  const std::size_t ai = a.id;
  return a.tape->push("row_max", std::move(out), {ai}, [ai, arg = std::move(arg)](Tape& t, const Matrix& g) {
    Matrix& buf = t.grad_buffer(ai);
    for (std::size_t r = 0; r < arg.size(); ++r) buf(r, arg[r]) += g(r, 0);
  });
}

Var col_sum(Var a) {
  const Matrix& av = a.value();
  Matrix out(1, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(0, c) += av(r, c);
  const std::size_t ai = a.id;
  return a.tape->push("col_sum", std::move(out), {ai}, [ai](Tape& t, const Matrix& g) {
    Matrix& buf = t.grad_buffer(ai);
    for (std::size_t r = 0; r < buf.rows(); ++r)
      for (std::size_t c = 0; c < buf.cols(); ++c) buf(r, c) += g(0, c);
  });
}

Var row_dot(Var a, Var b) {
  require_same("row_dot", a, b);
  const Matrix& av = a.value();
  Matrix out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) out(r, 0) = mecole::dot(av.row(r), b.value().row(r));
  const std::size_t ai = a.id, bi = b.id;
  return a.tape->push("row_dot", std::move(out), {ai, bi}, [ai, bi](Tape& t, const Matrix& g) {
    const Matrix& av = t.value(ai);
    const Matrix& bv = t.value(bi);
    if (t.requires_grad(ai)) {
      Matrix& buf = t.grad_buffer(ai);
      for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) buf(r, c) += g(r, 0) * bv(r, c);
    }
    if (t.requires_grad(bi)) {
      Matrix& buf = t.grad_buffer(bi);
      for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) buf(r, c) += g(r, 0) * av(r, c);
    }
  });
}

Var spmm(const SparseMatrix& s, Var x) {
  const std::size_t xi = x.id;
  const SparseMatrix* sp = &s;
  return x.tape->push("spmm", s.multiply(x.value()), {xi},
                      [xi, sp](Tape& t, const Matrix& g) { accumulate_matrix(t, xi, sp->multiply_transposed(g)); });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Matrix& av = a.value();
  Matrix out(rows.size(), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) throw NumericError("gather_rows: index out of range");
    auto src = av.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  const std::size_t ai = a.id;
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape->push("gather_rows", std::move(out), {ai}, [ai, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix& buf = t.grad_buffer(ai);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < g.cols(); ++c) buf(idx[i], c) += g(i, c);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw NumericError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids, offs;
  std::size_t off = 0;
  for (const Var& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, off + c) = p.value()(r, c);
    ids.push_back(p.id);
    offs.push_back(off);
    off += p.cols();
  }
  return parts.front().tape->push("concat_cols", std::move(out), ids, [ids, offs](Tape& t, const Matrix& g) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!t.requires_grad(ids[i])) continue;
      Matrix& buf = t.grad_buffer(ids[i]);
      for (std::size_t r = 0; r < buf.rows(); ++r)
        for (std::size_t c = 0; c < buf.cols(); ++c) buf(r, c) += g(r, offs[i] + c);
    }
  });
}

Var concat_rows(Var a, Var b) {
  if (a.cols() != b.cols()) throw NumericError("concat_rows: column mismatch");
  Matrix out(a.rows() + b.rows(), a.cols());
  std::copy(a.value().data().begin(), a.value().data().end(), out.data().begin());
  std::copy(b.value().data().begin(), b.value().data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(a.value().size()));
  const std::size_t ai = a.id, bi = b.id, split = a.value().size();
  return a.tape->push("concat_rows", std::move(out), {ai, bi}, [ai, bi, split](Tape& t, const Matrix& g) {
    if (t.requires_grad(ai)) {
      Matrix& buf = t.grad_buffer(ai);
      for (std::size_t k = 0; k < buf.size(); ++k) buf.data()[k] += g.data()[k];
    }
    if (t.requires_grad(bi)) {
      Matrix& buf = t.grad_buffer(bi);
      for (std::size_t k = 0; k < buf.size(); ++k) buf.data()[k] += g.data()[split + k];
    }
  });
}

Var select(Var a, std::size_t r, std::size_t c) {
  if (r >= a.rows() || c >= a.cols()) throw NumericError("select: index out of range");
  const std::size_t ai = a.id;
  return a.tape->push("select", Matrix(1, 1, a.value()(r, c)), {ai},
                      [ai, r, c](Tape& t, const Matrix& g) { t.grad_buffer(ai)(r, c) += g(0, 0); });
}

Var segment_logsumexp(Var x, std::span<const std::size_t> offsets) {
  const Matrix& xv = x.value();
  if (xv.cols() != 1) throw NumericError("segment_logsumexp: input must be a column");
  if (offsets.size() < 2 || offsets.back() != xv.rows()) throw NumericError("segment_logsumexp: bad offsets");
  const std::size_t segs = offsets.size() - 1;
  Matrix out(segs, 1);
  for (std::size_t s = 0; s < segs; ++s) {
    if (offsets[s + 1] <= offsets[s]) throw NumericError("segment_logsumexp: empty segment");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) mx = std::max(mx, xv(i, 0));
    double acc = 0.0;
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) acc += std::exp(xv(i, 0) - mx);
    out(s, 0) = mx + std::log(acc);
  }
  const std::size_t xi = x.id;
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return x.tape->push("segment_logsumexp", std::move(out), {xi},
                      [xi, off = std::move(off), self = x.tape->size()](Tape& t, const Matrix& g) {
                        const Matrix& xv = t.value(xi);
                        const Matrix& y = t.value(self);
                        Matrix& buf = t.grad_buffer(xi);
                        for (std::size_t s = 0; s + 1 < off.size(); ++s)
                          for (std::size_t i = off[s]; i < off[s + 1]; ++i)
                            buf(i, 0) += g(s, 0) * std::exp(xv(i, 0) - y(s, 0));
                      });
}

}  // namespace mecole::ad
