#include "mecole/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mecole/error.hpp"

namespace mecole::contrast {

namespace {

constexpr double kStdFloor = 1e-3;

// One weighted draw; weights need not be normalized.
std::size_t draw_index(std::span<const double> w, std::mt19937_64& rng) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::uniform_real_distribution<double> u(0.0, total);
  double x = u(rng);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (x < w[i]) return i;
    x -= w[i];
  }
  // rounding at the upper edge: last positive weight
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0.0) return i;
  return w.size() - 1;
}

// Weighted sampling without replacement by sequential draws.
std::vector<std::size_t> draw_without_replacement(std::vector<double> w, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> picked;
  count = std::min(count, w.size());
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t i = draw_index(w, rng);
    picked.push_back(i);
    w[i] = 0.0;
    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0 && t + 1 < count) {
      // remaining weights vanished: fall back to uniform over the rest
      for (std::size_t j = 0; j < w.size(); ++j)
        if (std::find(picked.begin(), picked.end(), j) == picked.end()) w[j] = 1.0;
    }
  }
  return picked;
}

void check_normalized(const std::vector<double>& p, const char* what) {
  if (p.empty()) return;
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  if (std::abs(s - 1.0) > 1e-9) throw DataError(std::string("batch: ") + what + " probabilities do not sum to 1");
}

}  // namespace

void validate_batch(const ContrastiveBatch& b, const Graph& g) {
  if (b.positives.empty() || b.negatives.empty()) throw DataError("batch: needs a positive and a negative");
  for (NodeId p : b.positives)
    if (!g.has_edge(b.anchor, p)) throw DataError("batch: positive outside the anchor neighborhood");
  for (NodeId n : b.negatives)
    if (n == b.anchor || g.has_edge(b.anchor, n)) throw DataError("batch: negative inside the anchor neighborhood");
  check_normalized(b.positive_probs, "positive");
  check_normalized(b.negative_probs, "negative");
}

// ---- anchors ------------------------------------------------------------------

std::vector<double> anchor_weights(const Assignment& a, std::size_t k, std::span<const NodeId> members) {
  std::vector<double> w(members.size());
  if (members.empty()) return w;
  double mean = 0.0;
  for (NodeId v : members) mean += a.R(v, k);
  mean /= static_cast<double>(members.size());
  double var = 0.0;
  for (NodeId v : members) var += (a.R(v, k) - mean) * (a.R(v, k) - mean);
  const double s = std::max(std::sqrt(var / static_cast<double>(members.size())), kStdFloor);
  // log-space so tightly concentrated classes do not underflow to all-zero
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < members.size(); ++i) {
    const double r = a.R(members[i], k);
    w[i] = -r * r / (2.0 * s * s);
    mx = std::max(mx, w[i]);
  }
  double total = 0.0;
  for (double& x : w) total += (x = std::exp(x - mx));
  for (double& x : w) x /= total;
  return w;
}

std::vector<NodeId> sample_anchors(const Assignment& a, std::size_t per_class, std::mt19937_64& rng) {
  if (per_class < 1) throw ConfigError("anchors: per_class must be at least 1");
  auto members = a.class_members(true);
  std::vector<NodeId> out;
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto& m = members[k];
    if (m.size() <= per_class) {
      out.insert(out.end(), m.begin(), m.end());
      continue;
    }
    for (std::size_t i : draw_without_replacement(anchor_weights(a, k, m), per_class, rng)) out.push_back(m[i]);
  }
  return out;
}

// ---- virtual nodes ----------------------------------------------------------------

VirtualNode blend(NodeId anchor, NodeId donor, std::vector<bool> mask, const DecoupledEmbeddings& e) {
  if (mask.size() != e.hd.cols()) throw DataError("blend: mask length does not match dependent dim");
  VirtualNode vn;
  vn.anchor = anchor;
  vn.donor = donor;
  vn.hd.resize(mask.size());
  for (std::size_t c = 0; c < mask.size(); ++c) vn.hd[c] = mask[c] ? e.hd(donor, c) : e.hd(anchor, c);
  auto ho = e.ho.row(anchor);
  vn.ho.assign(ho.begin(), ho.end());
  vn.mask = std::move(mask);
  return vn;
}

std::vector<bool> draw_mask(std::size_t dims, double p_ce, std::mt19937_64& rng) {
  if (!(p_ce > 0.0 && p_ce <= 1.0)) throw ConfigError("virtual node: p_ce must lie in (0, 1]");
  if (dims == 0) throw DataError("virtual node: no class-dependent dims");
  std::bernoulli_distribution coin(p_ce);
  std::vector<bool> mask(dims);
  bool any = false;
  while (!any) {
    for (std::size_t c = 0; c < dims; ++c) any = (mask[c] = coin(rng)) || any;
  }
  return mask;
}

VirtualNode synthesize_virtual_node(NodeId anchor, const Assignment& a, const DecoupledEmbeddings& e, double p_ce,
                                    std::mt19937_64& rng) {
  const int own = a.hard(anchor);
  std::vector<NodeId> donors;
  for (bool relevant_only : {true, false}) {
    for (NodeId u = 0; u < a.num_nodes(); ++u) {
      if (relevant_only && !a.relevant.empty() && !a.relevant[u]) continue;
      if (a.hard(u) != own) donors.push_back(u);
    }
    if (!donors.empty()) break;
  }
  if (donors.empty()) throw DataError("virtual node: no opposing class for anchor " + std::to_string(anchor));
  std::uniform_int_distribution<std::size_t> pick(0, donors.size() - 1);
  const NodeId donor = donors[pick(rng)];
  return blend(anchor, donor, draw_mask(e.hd.cols(), p_ce, rng), e);
}

// ---- sampling -----------------------------------------------------------------

NegativeSample negative_candidates(std::span<const VirtualNode> virt, const DecoupledEmbeddings& e, const Graph& g,
                                   std::size_t pool_size) {
  if (virt.empty()) throw DataError("negatives: no virtual nodes");
  const NodeId v = virt.front().anchor;
  std::vector<std::pair<double, NodeId>> scored;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (u == v || g.has_edge(v, u)) continue;
    double z = 0.0;
    for (const VirtualNode& vn : virt) {
      std::span<const double> ho_u = e.has_invariant() ? e.ho.row(u) : std::span<const double>{};
      std::span<const double> ho_v = e.has_invariant() ? std::span<const double>(vn.ho) : std::span<const double>{};
      z += decouple::predict_link(vn.hd, e.hd.row(u), ho_v, ho_u).z;
    }
    scored.emplace_back(z / static_cast<double>(virt.size()), u);
  }
  if (scored.empty()) throw DataError("negatives: anchor " + std::to_string(v) + " has no non-neighbor");
  const std::size_t take = std::min(pool_size, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  NegativeSample pool;
  for (std::size_t i = 0; i < take; ++i) {
    pool.nodes.push_back(scored[i].second);
    pool.probs.push_back(scored[i].first);
  }
  return pool;
}

NegativeSample sample_negatives(std::span<const VirtualNode> virt, const DecoupledEmbeddings& e, const Graph& g,
                                std::size_t m, std::size_t pool_size, std::mt19937_64& rng) {
  if (m < 1) throw ConfigError("negatives: m must be at least 1");
  NegativeSample pool = negative_candidates(virt, e, g, std::max(pool_size, m));
  NegativeSample out;
  double total = 0.0;
  for (std::size_t i : draw_without_replacement(pool.probs, m, rng)) {
    out.nodes.push_back(pool.nodes[i]);
    out.probs.push_back(pool.probs[i]);
    total += pool.probs[i];
  }
  for (double& p : out.probs) p /= total;
  return out;
}

NegativeSample sample_negatives(const VirtualNode& virt, const DecoupledEmbeddings& e, const Graph& g, std::size_t m,
                                std::mt19937_64& rng) {
  return sample_negatives(std::span<const VirtualNode>(&virt, 1), e, g, m, 10 * m, rng);
}

NegativeSample sample_uniform_negatives(NodeId v, const Graph& g, std::size_t m, std::mt19937_64& rng) {
  if (m < 1) throw ConfigError("negatives: m must be at least 1");
  std::vector<NodeId> pool;
  for (NodeId u = 0; u < g.num_nodes(); ++u)
    if (u != v && !g.has_edge(v, u)) pool.push_back(u);
  if (pool.empty()) throw DataError("negatives: anchor " + std::to_string(v) + " has no non-neighbor");
  NegativeSample out;
  for (std::size_t i : draw_without_replacement(std::vector<double>(pool.size(), 1.0), m, rng))
    out.nodes.push_back(pool[i]);
  out.probs.assign(out.nodes.size(), 1.0 / static_cast<double>(out.nodes.size()));
  return out;
}

std::vector<NodeId> sample_positives(NodeId v, const Graph& g, std::size_t count, std::mt19937_64& rng) {
  auto nb = g.neighbors(v);
  if (nb.empty()) return {};
  std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(nb[pick(rng)]);
  return out;
}

// ---- loss -----------------------------------------------------------------------

ad::Var contrastive_loss(std::span<const ContrastiveBatch> batches, ad::Var hd, bool include_positive) {
  if (batches.empty()) throw DataError("contrastive: no batches");
  std::vector<std::size_t> pos_left, pos_right, seg_left, seg_right, offsets{0};
  std::vector<double> pos_scale, seg_scale;
  for (const ContrastiveBatch& b : batches) {
    if (!(b.tau > 0.0)) throw ConfigError("contrastive: tau must be positive");
    if (b.positives.empty() || b.negatives.empty()) throw DataError("contrastive: batch needs a positive and a negative");
    for (NodeId p : b.positives) {
      pos_left.push_back(b.anchor);
      pos_right.push_back(p);
      pos_scale.push_back(1.0 / b.tau);
      if (include_positive) {
        seg_left.push_back(b.anchor);
        seg_right.push_back(p);
        seg_scale.push_back(1.0 / b.tau);
      }
      for (NodeId n : b.negatives) {
        seg_left.push_back(b.anchor);
        seg_right.push_back(n);
        seg_scale.push_back(1.0 / b.tau);
      }
      offsets.push_back(seg_left.size());
    }
  }
  ad::Tape& tape = *hd.tape;
  auto scores = [&](const std::vector<std::size_t>& l, const std::vector<std::size_t>& r, std::vector<double>& s) {
    ad::Var dots = ad::row_dot(ad::gather_rows(hd, l), ad::gather_rows(hd, r));
    const std::size_t rows = s.size();
    return ad::mul(dots, tape.constant(Matrix(rows, 1, std::move(s))));
  };
  ad::Var pos = scores(pos_left, pos_right, pos_scale);
  ad::Var lse = ad::segment_logsumexp(scores(seg_left, seg_right, seg_scale), offsets);
  return ad::mean(ad::sub(lse, pos));
}

}  // namespace mecole::contrast
