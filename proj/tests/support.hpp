#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mecole/autodiff.hpp"
#include "mecole/graph.hpp"
#include "mecole/matrix.hpp"

namespace testing {

using mecole::Matrix;

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (double& x : m.data()) x = nd(rng);
  return m;
}

// Relative error with a floor so entries near zero compare absolutely.
inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); }

// Builds a scalar loss from leaf variables, one per input matrix.
using LossFn = std::function<mecole::ad::Var(mecole::ad::Tape&, const std::vector<mecole::ad::Var>&)>;

// Max relative error between tape gradients and central differences
// (step h) over every entry of every input.
inline double gradient_check(const LossFn& f, std::vector<Matrix> inputs, double h = 1e-5) {
  std::vector<Matrix> analytic;
  {
    mecole::ad::Tape tape;
    std::vector<mecole::ad::Var> leaves;
    for (const auto& m : inputs) leaves.push_back(tape.leaf(m));
    tape.backward(f(tape, leaves));
    for (const auto& l : leaves) analytic.push_back(l.grad().empty() ? Matrix(l.rows(), l.cols()) : l.grad());
  }
  auto eval = [&](const std::vector<Matrix>& xs) {
    mecole::ad::Tape tape;
    std::vector<mecole::ad::Var> leaves;
    for (const auto& m : xs) leaves.push_back(tape.constant(m));
    return f(tape, leaves).scalar();
  };
  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t)
    for (std::size_t k = 0; k < inputs[t].size(); ++k) {
      const double keep = inputs[t].data()[k];
      inputs[t].data()[k] = keep + h;
      const double up = eval(inputs);
      inputs[t].data()[k] = keep - h;
      const double down = eval(inputs);
      inputs[t].data()[k] = keep;
      worst = std::max(worst, rel_err(analytic[t].data()[k], (up - down) / (2.0 * h)));
    }
  return worst;
}

inline mecole::Graph graph_of(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> pairs) {
  std::vector<mecole::Edge> edges;
  for (auto [u, v] : pairs) edges.push_back({u, v, 1.0});
  return mecole::Graph::from_edges(n, edges);
}

inline mecole::Graph random_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<mecole::Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (coin(rng)) edges.push_back({u, v, 1.0});
  // keep every node attached so samplers have neighbors
  for (std::size_t u = 0; u + 1 < n; ++u)
    if (std::none_of(edges.begin(), edges.end(), [&](const mecole::Edge& e) { return e.u == u || e.v == u; }))
      edges.push_back({u, u + 1, 1.0});
  return mecole::Graph::from_edges(n, edges);
}

inline mecole::Graph cliques(std::size_t count, std::size_t size) {
  std::vector<mecole::Edge> edges;
  for (std::size_t c = 0; c < count; ++c)
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = i + 1; j < size; ++j) edges.push_back({c * size + i, c * size + j, 1.0});
  return mecole::Graph::from_edges(count * size, edges);
}

}  // namespace testing
