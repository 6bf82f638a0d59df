#include "mecole/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mecole/error.hpp"

namespace mecole::metrics {

std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t n = weight.size();
  // shortest augmenting path formulation on cost = -weight, 1-based potentials
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -weight[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) col[p[j] - 1] = j - 1;
  return col;
}

namespace {

struct Contingency {
  std::vector<std::vector<double>> table;  // [pred][truth]
  double total = 0.0;
};

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw DataError("metrics: prediction and truth lengths differ");
  std::map<int, std::size_t> pid, tid;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] < 0) continue;
    pid.emplace(pred[i], pid.size());
    tid.emplace(truth[i], tid.size());
  }
  Contingency c;
  c.table.assign(pid.size(), std::vector<double>(tid.size(), 0.0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] < 0) continue;
    c.table[pid[pred[i]]][tid[truth[i]]] += 1.0;
    c.total += 1.0;
  }
  return c;
}

}  // namespace

double clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
  Contingency c = contingency(pred, truth);
  if (c.total == 0.0) throw DataError("accuracy: no labeled nodes");
  const std::size_t size = std::max(c.table.size(), c.table.empty() ? 0 : c.table.front().size());
  std::vector<std::vector<double>> w(size, std::vector<double>(size, 0.0));
  for (std::size_t i = 0; i < c.table.size(); ++i)
    for (std::size_t j = 0; j < c.table[i].size(); ++j) w[i][j] = c.table[i][j];
  auto match = max_weight_assignment(w);
  double hits = 0.0;
  for (std::size_t i = 0; i < size; ++i) hits += w[i][match[i]];
  return hits / c.total;
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  Contingency c = contingency(pred, truth);
  if (c.total == 0.0) throw DataError("nmi: no labeled nodes");
  if (c.table.size() < 2 || c.table.front().size() < 2) return 0.0;
  std::vector<double> row(c.table.size(), 0.0), col(c.table.front().size(), 0.0);
  for (std::size_t i = 0; i < row.size(); ++i)
    for (std::size_t j = 0; j < col.size(); ++j) {
      row[i] += c.table[i][j];
      col[j] += c.table[i][j];
    }
  auto entropy = [&](const std::vector<double>& counts) {
    double h = 0.0;
    for (double x : counts)
      if (x > 0.0) h -= x / c.total * std::log(x / c.total);
    return h;
  };
  double mi = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i)
    for (std::size_t j = 0; j < col.size(); ++j) {
      const double nij = c.table[i][j];
      if (nij > 0.0) mi += nij / c.total * std::log(c.total * nij / (row[i] * col[j]));
    }
  const double denom = 0.5 * (entropy(row) + entropy(col));
  if (denom <= 0.0) return 0.0;
  return std::clamp(mi / denom, 0.0, 1.0);
}

}  // namespace mecole::metrics
