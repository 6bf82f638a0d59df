#include "mecole/assignment.hpp"

#include <cmath>
#include <string>

#include "mecole/error.hpp"

namespace mecole {

int Assignment::hard(std::size_t i) const {
  auto row = R.row(i);
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return static_cast<int>(best);
}

std::vector<int> Assignment::hard_labels() const {
  std::vector<int> out(num_nodes());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = hard(i);
  return out;
}

std::vector<std::vector<std::size_t>> Assignment::class_members(bool relevant_only) const {
  std::vector<std::vector<std::size_t>> members(num_classes());
  for (std::size_t i = 0; i < num_nodes(); ++i) {
    if (relevant_only && !relevant.empty() && !relevant[i]) continue;
    members[static_cast<std::size_t>(hard(i))].push_back(i);
  }
  return members;
}

void Assignment::validate() const {
  if (relevant.size() != R.rows()) throw NumericError("assignment: relevance flags do not match rows");
  for (std::size_t i = 0; i < R.rows(); ++i) {
    double s = 0.0;
    for (double v : R.row(i)) {
      if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) {
        throw NumericError("assignment: entry outside [0,1] in row " + std::to_string(i));
      }
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-6) {
      throw NumericError("assignment: row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

Assignment Assignment::from_hard(const std::vector<int>& labels, std::size_t k) {
  Assignment a{Matrix(labels.size(), k), std::vector<bool>(labels.size(), true)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw DataError("assignment: label out of range at node " + std::to_string(i));
    }
    a.R(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return a;
}

}  // namespace mecole
