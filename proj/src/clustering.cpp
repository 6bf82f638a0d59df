#include "mecole/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

#include "mecole/error.hpp"
#include "mecole/nn.hpp"

namespace mecole::cluster {

double modularity(const Graph& g, std::span<const int> labels) {
  if (labels.size() != g.num_nodes()) throw DataError("modularity: label count does not match node count");
  if (g.num_edges() == 0) throw DataError("modularity: graph has no edges");
  int max_label = 0;
  for (int l : labels) {
    if (l < 0) throw DataError("modularity: negative label");
    max_label = std::max(max_label, l);
  }
  std::vector<double> intra(static_cast<std::size_t>(max_label) + 1, 0.0);
  std::vector<double> degree_sum(intra.size(), 0.0);
  double m = 0.0;
  for (const Edge& e : g.edges()) {
    m += e.weight;
    degree_sum[static_cast<std::size_t>(labels[e.u])] += e.weight;
    degree_sum[static_cast<std::size_t>(labels[e.v])] += e.weight;
    if (labels[e.u] == labels[e.v]) intra[static_cast<std::size_t>(labels[e.u])] += e.weight;
  }
  double q = 0.0;
  for (std::size_t c = 0; c < intra.size(); ++c) {
    const double frac = degree_sum[c] / (2.0 * m);
    q += intra[c] / m - frac * frac;
  }
  return q;
}

double soft_modularity(const Graph& g, const Matrix& c) {
  ModularityTerms terms(g);
  const Matrix ac = terms.adjacency.multiply(c);
  double trace_ac = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) trace_ac += c.data()[k] * ac.data()[k];
  const Matrix dc = mecole::matmul(terms.degrees, c);
  double null = 0.0;
  for (double x : dc.data()) null += x * x;
  return (trace_ac - null / terms.two_m) / terms.two_m;
}

ModularityTerms::ModularityTerms(const Graph& g) : adjacency(adjacency_matrix(g)), degrees(1, g.num_nodes()) {
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    double d = 0.0;
    for (double w : g.neighbor_weights(i)) d += w;
    degrees(0, i) = d;
    two_m += d;
  }
  if (two_m <= 0.0) throw DataError("modularity: graph has no edges");
}

ad::Var modularity_objective(const ModularityTerms& terms, ad::Var c, double collapse_weight) {
  ad::Tape& tape = *c.tape;
  const double n = static_cast<double>(c.rows());
  const double k = static_cast<double>(c.cols());
  // tr(C^T A C) - ||d^T C||^2 / 2m
  ad::Var trace_ac = ad::sum(ad::mul(c, ad::spmm(terms.adjacency, c)));
  ad::Var dc = ad::matmul(tape.constant(terms.degrees), c);
  ad::Var null = ad::scale(ad::sum(ad::square(dc)), 1.0 / terms.two_m);
  ad::Var q = ad::scale(ad::sub(trace_ac, null), 1.0 / terms.two_m);
  ad::Var cluster_sizes = ad::col_sum(c);
  ad::Var collapse = ad::add_scalar(ad::scale(ad::sqrt(ad::sum(ad::square(cluster_sizes))), std::sqrt(k) / n), -1.0);
  return ad::add(ad::scale(q, -1.0), ad::scale(collapse, collapse_weight));
}

Assignment init_assignments(const GraphBundle& bundle, const FeatureMatrix& x, std::size_t k,
                            const ModularityInitConfig& cfg, std::uint64_t seed) {
  bundle.validate();
  if (k < 2) throw ConfigError("init: K must be at least 2");
  if (cfg.epochs < 1) throw ConfigError("init: epochs must be at least 1");
  if (x.rows() != bundle.primary.num_nodes()) throw DataError("init: feature rows do not match node count");

  std::vector<SparseMatrix> channels{normalize_adjacency(bundle.primary)};
  for (const auto& [name, g] : bundle.auxiliary) channels.push_back(normalize_adjacency(g));
  std::vector<const SparseMatrix*> views;
  for (const auto& c : channels) views.push_back(&c);

  ModularityTerms terms(bundle.primary);
  std::mt19937_64 rng(seed);
  nn::ParameterStore store;
  nn::GcnTower gcn(store, "init", x.cols(), cfg.hidden, k, views.size(), rng);
  nn::Adam adam({.lr = cfg.lr});

  auto forward = [&](ad::Tape& tape) { return ad::softmax_rows(gcn.forward(tape, views, tape.constant(x))); };
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    ad::Var loss;
    try {
      loss = modularity_objective(terms, forward(tape), cfg.collapse_weight);
    } catch (const NumericError& e) {
      throw NumericError("init: diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    store.zero_grad();
    tape.backward(loss);
    adam.step(store);
  }
  ad::Tape tape;
  Assignment a{forward(tape).value(), std::vector<bool>(x.rows(), true)};
  a.validate();
  return a;
}

AssignmentUpdater::AssignmentUpdater(std::size_t k, UpdateOptions opts) : k_(k), opts_(opts) {
  if (k < 2) throw ConfigError("update: K must be at least 2");
  if (!(opts.q > 0.0 && opts.q <= 1.0)) throw ConfigError("update: q must lie in (0, 1]");
}

double AssignmentUpdater::relevance_floor() const {
  return opts_.relevance_floor < 0.0 ? 1.2 / static_cast<double>(k_) : opts_.relevance_floor;
}

Assignment AssignmentUpdater::update(const Matrix& hd, const Assignment& prev) {
  const std::size_t n = hd.rows();
  const std::size_t d = hd.cols();
  if (prev.num_nodes() != n || prev.num_classes() != k_) throw DataError("update: assignment shape mismatch");
  if (weights_.rows() != k_ || weights_.cols() != d + 1) weights_ = Matrix(k_, d + 1);

  // design matrix: hd with a trailing bias column
  Matrix x(n, d + 1);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(hd.row(i).begin(), d, x.row(i).begin());
  for (std::size_t i = 0; i < n; ++i) x(i, d) = 1.0;

  // pseudo-labels: top-q most confident members of each class
  std::vector<int> pseudo(n, -1);
  auto members = prev.class_members(false);
  for (std::size_t k = 0; k < k_; ++k) {
    auto& m = members[k];
    std::stable_sort(m.begin(), m.end(), [&](std::size_t a, std::size_t b) { return prev.R(a, k) > prev.R(b, k); });
    const auto take = static_cast<std::size_t>(std::ceil(opts_.q * static_cast<double>(m.size())));
    for (std::size_t i = 0; i < take && i < m.size(); ++i) pseudo[m[i]] = static_cast<int>(k);
  }
  std::vector<std::size_t> labelled;
  for (std::size_t i = 0; i < n; ++i)
    if (pseudo[i] >= 0) labelled.push_back(i);

  if (!labelled.empty()) {
    double mean_sq = 0.0;
    for (std::size_t i : labelled) mean_sq += dot(x.row(i), x.row(i));
    mean_sq /= static_cast<double>(labelled.size());
    // 1 / Lipschitz constant of the mean logistic loss
    const double lr = 1.0 / (0.25 * mean_sq + opts_.l2);
    const double inv_count = 1.0 / static_cast<double>(labelled.size());
    std::vector<double> w(d + 1), grad(d + 1);
    for (std::size_t k = 0; k < k_; ++k) {
      if (members[k].empty()) continue;  // keep previous regressor
      std::copy(weights_.row(k).begin(), weights_.row(k).end(), w.begin());  // warm start
      for (std::size_t step = 0; step < opts_.steps; ++step) {
        for (std::size_t c = 0; c <= d; ++c) grad[c] = opts_.l2 * w[c];
        for (std::size_t i : labelled) {
          const double y = pseudo[i] == static_cast<int>(k) ? 1.0 : 0.0;
          const double p = 1.0 / (1.0 + std::exp(-dot(x.row(i), w)));
          const double r = (p - y) * inv_count;
          auto xi = x.row(i);
          for (std::size_t c = 0; c <= d; ++c) grad[c] += r * xi[c];
        }
        for (std::size_t c = 0; c <= d; ++c) w[c] -= lr * grad[c];
      }
      std::copy(w.begin(), w.end(), weights_.row(k).begin());
    }
  }

  Assignment out{Matrix(n, k_), std::vector<bool>(n, true)};
  const double floor = relevance_floor();
  std::vector<double> s(k_);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < k_; ++k) s[k] = dot(x.row(i), weights_.row(k));
    const double mx = *std::max_element(s.begin(), s.end());
    double total = 0.0;
    for (double& v : s) total += (v = std::exp(v - mx));
    double best = 0.0;
    for (std::size_t k = 0; k < k_; ++k) best = std::max(best, out.R(i, k) = s[k] / total);
    out.relevant[i] = best >= floor;
  }
  out.validate();
  return out;
}

Assignment update_assignments(const Matrix& hd, const Assignment& prev, double q, double relevance_floor) {
  AssignmentUpdater updater(prev.num_classes(), {.q = q, .relevance_floor = relevance_floor});
  return updater.update(hd, prev);
}

void export_assignment_csv(const Assignment& a, std::ostream& out) {
  out << "node_id,argmax";
  for (std::size_t k = 0; k < a.num_classes(); ++k) out << ",r_" << k;
  out << ",relevant\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < a.num_nodes(); ++i) {
    out << i << ',' << a.hard(i);
    for (std::size_t k = 0; k < a.num_classes(); ++k) out << ',' << a.R(i, k);
    out << ',' << (a.relevant[i] ? 1 : 0) << '\n';
  }
  out.precision(old);
}

}  // namespace mecole::cluster
