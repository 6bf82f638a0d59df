#include "mecole/decoupling.hpp"

#include <algorithm>
#include <cmath>

#include "mecole/error.hpp"

namespace mecole::decouple {

namespace {

constexpr double kRatioEps = 1e-8;
constexpr double kRewireEps = 1e-8;
constexpr double kProbClip = 1e-7;
// keeps sqrt differentiable at coincident points
constexpr double kNormEps = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void DecoupledEmbeddings::validate() const {
  if (has_invariant() && ho.rows() != hd.rows()) throw NumericError("embeddings: hd and ho row counts differ");
  if (!hd.all_finite() || !ho.all_finite()) throw NumericError("embeddings: non-finite entries");
}

DecoupledEmbeddings EmbeddingVars::values() const {
  DecoupledEmbeddings e;
  e.hd = hd.value();
  if (has_invariant()) e.ho = ho.value();
  else e.ho = Matrix(hd.rows(), 0);
  return e;
}

DiscrepancyMetric parse_metric(const std::string& name) {
  if (name == "l1") return DiscrepancyMetric::l1;
  if (name == "l2") return DiscrepancyMetric::l2;
  if (name == "cosine") return DiscrepancyMetric::cosine;
  if (name == "linf" || name == "l_inf") return DiscrepancyMetric::linf;
  throw ConfigError("unknown discrepancy metric '" + name + "' (expected l1, l2, cosine, linf)");
}

std::string to_string(DiscrepancyMetric m) {
  switch (m) {
    case DiscrepancyMetric::l1:
      return "l1";
    case DiscrepancyMetric::l2:
      return "l2";
    case DiscrepancyMetric::cosine:
      return "cosine";
    case DiscrepancyMetric::linf:
      return "linf";
  }
  return "?";
}

double discrepancy(DiscrepancyMetric metric, std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  switch (metric) {
    case DiscrepancyMetric::l1:
      for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
      return acc;
    case DiscrepancyMetric::l2:
      for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
      return std::sqrt(acc + kNormEps);
    case DiscrepancyMetric::linf:
      for (std::size_t i = 0; i < a.size(); ++i) acc = std::max(acc, std::abs(a[i] - b[i]));
      return acc;
    case DiscrepancyMetric::cosine: {
      const double na = std::sqrt(dot(a, a) + kNormEps);
      const double nb = std::sqrt(dot(b, b) + kNormEps);
      return 1.0 - dot(a, b) / (na * nb);
    }
  }
  return acc;
}

// ---- encoder ------------------------------------------------------------------

DecoupledEncoder::DecoupledEncoder(nn::ParameterStore& store, std::size_t in_dim, std::size_t aux_channels,
                                   const EncoderConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg),
      dependent_(store, "enc.dep", in_dim, cfg.hidden, cfg.dim_d, 1 + aux_channels, rng) {
  if (cfg.dim_d == 0) throw ConfigError("encoder: dim_d must be positive");
  if (cfg.decouple) {
    if (cfg.dim_o == 0) throw ConfigError("encoder: dim_o must be positive when decoupling");
    invariant_ = nn::GcnTower(store, "enc.inv", in_dim, cfg.hidden, cfg.dim_o, 1 + aux_channels, rng);
  }
}

EmbeddingVars DecoupledEncoder::forward(Tape& tape, const EncoderInputs& inputs) const {
  if (!inputs.features || !inputs.dependent_primary) throw ConfigError("encoder: missing inputs");
  Var x = tape.constant(*inputs.features);
  std::vector<const SparseMatrix*> dep{inputs.dependent_primary};
  dep.insert(dep.end(), inputs.auxiliary.begin(), inputs.auxiliary.end());
  EmbeddingVars out;
  out.hd = dependent_.forward(tape, dep, x);
  if (cfg_.decouple) {
    std::vector<const SparseMatrix*> inv{inputs.invariant_primary ? inputs.invariant_primary
                                                                  : inputs.dependent_primary};
    inv.insert(inv.end(), inputs.auxiliary.begin(), inputs.auxiliary.end());
    out.ho = invariant_.forward(tape, inv, x);
  }
  return out;
}

DecoupledEmbeddings DecoupledEncoder::encode(const EncoderInputs& inputs) const {
  Tape tape;
  return forward(tape, inputs).values();
}

// ---- link prediction ----------------------------------------------------------

LinkProbability predict_link(std::span<const double> hd_u, std::span<const double> hd_v,
                             std::span<const double> ho_u, std::span<const double> ho_v) {
  LinkProbability p;
  p.z_d = sigmoid(dot(hd_u, hd_v));
  p.z_o = ho_u.empty() ? 1.0 : sigmoid(dot(ho_u, ho_v));
  p.z = p.z_d * p.z_o;
  return p;
}

LinkProbability predict_link(NodeId u, NodeId v, const DecoupledEmbeddings& e) {
  if (u == v) throw DataError("predict_link: u and v must differ");
  if (!e.has_invariant()) return predict_link(e.hd.row(u), e.hd.row(v), {}, {});
  return predict_link(e.hd.row(u), e.hd.row(v), e.ho.row(u), e.ho.row(v));
}

MlpLinkHead::MlpLinkHead(nn::ParameterStore& store, std::size_t dim_d, std::size_t dim_o, std::size_t hidden,
                         std::mt19937_64& rng)
    : has_invariant_(dim_o > 0) {
  const std::size_t in = 2 * dim_d + 2 * dim_o;
  w1_ = &store.add("mlp.w1", nn::glorot(in, hidden, rng));
  b1_ = &store.add("mlp.b1", Matrix(1, hidden));
  w2_ = &store.add("mlp.w2", nn::glorot(hidden, 1, rng));
  b2_ = &store.add("mlp.b2", Matrix(1, 1));
}

Var MlpLinkHead::forward(Tape& tape, Var hd_u, Var hd_v, Var ho_u, Var ho_v) const {
  std::vector<Var> parts{hd_u, hd_v};
  if (has_invariant_) {
    parts.push_back(ho_u);
    parts.push_back(ho_v);
  }
  Var in = ad::concat_cols(parts);
  Var h = ad::relu(ad::add_row(ad::matmul(in, tape.parameter(*w1_)), tape.parameter(*b1_)));
  return ad::sigmoid(ad::add_row(ad::matmul(h, tape.parameter(*w2_)), tape.parameter(*b2_)));
}

// ---- losses -------------------------------------------------------------------

std::vector<NodePair> sample_non_edges(const Graph& g, std::size_t count, std::mt19937_64& rng) {
  const std::size_t n = g.num_nodes();
  const std::size_t all_pairs = n < 2 ? 0 : n * (n - 1) / 2;
  if (all_pairs <= g.num_edges()) throw DataError("negative sampling: graph has no non-adjacent pair");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<NodePair> out;
  out.reserve(count);
  while (out.size() < count) {
    const NodeId u = pick(rng);
    const NodeId v = pick(rng);
    if (u == v || g.has_edge(u, v)) continue;
    out.push_back({u, v});
  }
  return out;
}

Var reconstruction_loss(const Graph& g, const EmbeddingVars& e, std::span<const NodePair> negatives,
                        const MlpLinkHead* head) {
  const std::size_t pos = g.num_edges();
  const std::size_t total = pos + negatives.size();
  if (total == 0) throw DataError("reconstruction: no edges and no negatives");
  std::vector<std::size_t> us, vs;
  us.reserve(total);
  vs.reserve(total);
  for (const Edge& edge : g.edges()) {
    us.push_back(edge.u);
    vs.push_back(edge.v);
  }
  for (const NodePair& p : negatives) {
    us.push_back(p.u);
    vs.push_back(p.v);
  }
  Tape& tape = *e.hd.tape;
  Var hd_u = ad::gather_rows(e.hd, us);
  Var hd_v = ad::gather_rows(e.hd, vs);
  Var z;
  if (head) {
    Var ho_u = e.has_invariant() ? ad::gather_rows(e.ho, us) : Var{};
    Var ho_v = e.has_invariant() ? ad::gather_rows(e.ho, vs) : Var{};
    z = head->forward(tape, hd_u, hd_v, ho_u, ho_v);
  } else {
    z = ad::sigmoid(ad::row_dot(hd_u, hd_v));
    if (e.has_invariant()) {
      z = ad::mul(z, ad::sigmoid(ad::row_dot(ad::gather_rows(e.ho, us), ad::gather_rows(e.ho, vs))));
    }
  }
  z = ad::clamp(z, kProbClip, 1.0 - kProbClip);
  Matrix target(total, 1, 0.0);
  for (std::size_t i = 0; i < pos; ++i) target(i, 0) = 1.0;
  Matrix anti(total, 1, 1.0);
  for (std::size_t i = 0; i < pos; ++i) anti(i, 0) = 0.0;
  Var y = tape.constant(std::move(target));
  Var ny = tape.constant(std::move(anti));
  Var one_minus_z = ad::add_scalar(ad::scale(z, -1.0), 1.0);
  Var ll = ad::add(ad::mul(y, ad::log(z)), ad::mul(ny, ad::log(one_minus_z)));
  return ad::scale(ad::mean(ll), -1.0);
}

Var reconstruction_loss(const Graph& g, const EmbeddingVars& e, std::size_t neg_ratio, std::mt19937_64& rng,
                        const MlpLinkHead* head) {
  if (neg_ratio < 1) throw ConfigError("reconstruction: neg_ratio must be at least 1");
  auto negatives = sample_non_edges(g, neg_ratio * g.num_edges(), rng);
  return reconstruction_loss(g, e, negatives, head);
}

std::vector<NodePair> sample_cross_class_pairs(const Assignment& a, std::size_t pairs, std::mt19937_64& rng) {
  if (pairs < 1) throw ConfigError("discrepancy: pairs must be at least 1");
  auto members = a.class_members(true);
  std::vector<std::size_t> nonempty;
  for (std::size_t k = 0; k < members.size(); ++k)
    if (!members[k].empty()) nonempty.push_back(k);
  if (nonempty.size() < 2) throw DataError("discrepancy: fewer than two non-empty classes");
  std::vector<std::pair<std::size_t, std::size_t>> class_pairs;
  for (std::size_t i = 0; i < nonempty.size(); ++i)
    for (std::size_t j = i + 1; j < nonempty.size(); ++j) class_pairs.emplace_back(nonempty[i], nonempty[j]);
  std::uniform_int_distribution<std::size_t> pick_pair(0, class_pairs.size() - 1);
  std::vector<NodePair> out;
  out.reserve(pairs);
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto [c1, c2] = class_pairs[pick_pair(rng)];
    std::uniform_int_distribution<std::size_t> p1(0, members[c1].size() - 1);
    std::uniform_int_distribution<std::size_t> p2(0, members[c2].size() - 1);
    const NodeId v1 = members[c1][p1(rng)];
    const NodeId v2 = members[c2][p2(rng)];
    out.push_back({v1, v2});
  }
  return out;
}

namespace {

Var pairwise_distance(Var h, std::span<const std::size_t> left, std::span<const std::size_t> right,
                      DiscrepancyMetric metric) {
  Var a = ad::gather_rows(h, left);
  Var b = ad::gather_rows(h, right);
  switch (metric) {
    case DiscrepancyMetric::l1:
      return ad::row_sum(ad::abs(ad::sub(a, b)));
    case DiscrepancyMetric::l2:
      return ad::sqrt(ad::add_scalar(ad::row_sum(ad::square(ad::sub(a, b))), kNormEps));
    case DiscrepancyMetric::linf:
      return ad::row_max(ad::abs(ad::sub(a, b)));
    case DiscrepancyMetric::cosine: {
      Var na = ad::sqrt(ad::add_scalar(ad::row_sum(ad::square(a)), kNormEps));
      Var nb = ad::sqrt(ad::add_scalar(ad::row_sum(ad::square(b)), kNormEps));
      Var cos = ad::div(ad::row_dot(a, b), ad::mul(na, nb));
      return ad::add_scalar(ad::scale(cos, -1.0), 1.0);
    }
  }
  throw ConfigError("unknown metric");
}

}  // namespace

Var discrepancy_loss(const EmbeddingVars& e, std::span<const NodePair> pairs, DiscrepancyMetric metric) {
  if (!e.has_invariant()) throw ConfigError("discrepancy: requires class-invariant embeddings");
  if (pairs.empty()) throw ConfigError("discrepancy: no pairs");
  std::vector<std::size_t> left, right;
  for (const NodePair& p : pairs) {
    left.push_back(p.u);
    right.push_back(p.v);
  }
  Var num = pairwise_distance(e.ho, left, right, metric);
  Var den = ad::add_scalar(pairwise_distance(e.hd, left, right, metric), kRatioEps);
  return ad::mean(ad::div(num, den));
}

Var discrepancy_loss(const EmbeddingVars& e, const Assignment& a, DiscrepancyMetric metric, std::size_t pairs,
                     std::mt19937_64& rng) {
  auto sampled = sample_cross_class_pairs(a, pairs, rng);
  return discrepancy_loss(e, sampled, metric);
}

// ---- rewiring -----------------------------------------------------------------

RewiredGraph rewire(const Graph& g, const Matrix& ho, double eta) {
  if (!(eta > 0.0)) throw ConfigError("rewire: eta must be positive");
  std::vector<double> w;
  w.reserve(g.num_edges());
  for (const Edge& e : g.edges()) {
    const double eo = ho.cols() == 0 ? 1.0 : sigmoid(dot(ho.row(e.u), ho.row(e.v)));
    w.push_back(std::min(eta, e.weight / std::max(eo, kRewireEps)));
  }
  return {g.with_weights(w), eta};
}

}  // namespace mecole::decouple
