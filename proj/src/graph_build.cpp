#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mecole/error.hpp"
#include "mecole/graph.hpp"

namespace mecole {

Graph build_knn_similarity_graph(const FeatureMatrix& x, std::size_t k, double eta_sim, KnnStats* stats) {
  if (eta_sim < -1.0 || eta_sim > 1.0) throw ConfigError("knn: eta_sim must lie in [-1, 1]");
  const std::size_t n = x.rows();
  std::vector<double> norms(n);
  std::size_t zero_rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = std::sqrt(dot(x.row(i), x.row(i)));
    if (norms[i] == 0.0) ++zero_rows;
  }
  if (stats) stats->zero_norm_rows = zero_rows;

  std::vector<Edge> proposals;
  if (k == 0) return Graph::from_edges(n, proposals);

  std::vector<std::pair<double, NodeId>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    if (norms[i] == 0.0) continue;
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || norms[j] == 0.0) continue;
      cand.emplace_back(dot(x.row(i), x.row(j)) / (norms[i] * norms[j]), j);
    }
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    for (std::size_t t = 0; t < take; ++t) {
      if (cand[t].first < eta_sim) break;
      proposals.push_back({i, cand[t].second, cand[t].first});
    }
  }
  return Graph::from_edges(n, proposals);
}

FeatureMatrix tfidf_class_features(const AttributeBag& bags, const Assignment& assignment) {
  bags.validate();
  const std::size_t n = bags.bags.size();
  if (assignment.num_nodes() != n) throw DataError("tfidf: assignment rows do not match bag count");
  const std::size_t K = assignment.num_classes();
  const std::size_t vocab = bags.vocabulary.rows();
  const std::size_t dim = bags.vocabulary.cols();

  // class documents: concatenated bags of relevant nodes under argmax
  std::vector<std::vector<double>> counts(K, std::vector<double>(vocab, 0.0));
  std::vector<double> doc_len(K, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!assignment.relevant.empty() && !assignment.relevant[i]) continue;
    const auto k = static_cast<std::size_t>(assignment.hard(i));
    for (std::size_t t : bags.bags[i]) {
      counts[k][t] += 1.0;
      doc_len[k] += 1.0;
    }
  }
  std::vector<double> idf(vocab, 0.0);
  for (std::size_t t = 0; t < vocab; ++t) {
    std::size_t df = 0;
    for (std::size_t k = 0; k < K; ++k) df += counts[k][t] > 0.0 ? 1 : 0;
    if (df > 0) idf[t] = std::log(static_cast<double>(K) / static_cast<double>(df));
  }
  auto score = [&](std::size_t k, std::size_t t) {
    return doc_len[k] > 0.0 ? counts[k][t] / doc_len[k] * idf[t] : 0.0;
  };

  FeatureMatrix out(n, dim);
  std::vector<double> acc(dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (bags.bags[i].empty()) continue;
    for (std::size_t k = 0; k < K; ++k) {
      const double r = assignment.R(i, k);
      if (r == 0.0) continue;
      std::fill(acc.begin(), acc.end(), 0.0);
      double total = 0.0;
      for (std::size_t t : bags.bags[i]) {
        const double s = score(k, t);
        total += s;
        auto xm = bags.vocabulary.row(t);
        for (std::size_t c = 0; c < dim; ++c) acc[c] += s * xm[c];
      }
      if (total == 0.0) continue;
      for (std::size_t c = 0; c < dim; ++c) out(i, c) += r * acc[c] / total;
    }
  }
  return out;
}

std::size_t SBMConfig::num_nodes() const {
  return std::accumulate(block_sizes.begin(), block_sizes.end(), std::size_t{0});
}

void SBMConfig::validate() const {
  if (block_sizes.size() < 1) throw ConfigError("sbm: at least one block required");
  for (std::size_t s : block_sizes) {
    if (s == 0) throw ConfigError("sbm: empty block");
  }
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0)) {
    throw ConfigError("sbm: require 0 <= p_out <= p_in <= 1");
  }
  if (dep_dim < block_sizes.size()) throw ConfigError("sbm: dep_dim must be at least the block count");
  if (noise_sigma < 0.0) throw ConfigError("sbm: noise_sigma must be non-negative");
  if (confound_strength < 0.0 || confound_strength > 1.0) {
    throw ConfigError("sbm: confound_strength must lie in [0, 1]");
  }
  if (confound_strength > 0.0 && inv_dim < block_sizes.size()) {
    throw ConfigError("sbm: confounding needs inv_dim >= block count");
  }
  if (confound_p < 0.0 || p_out + confound_p > 1.0) throw ConfigError("sbm: require 0 <= confound_p <= 1 - p_out");
}

SbmSample generate_sbm(const SBMConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.num_nodes();
  const std::size_t K = cfg.block_sizes.size();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SbmSample out;
  out.labels.reserve(n);
  for (std::size_t b = 0; b < K; ++b) {
    for (std::size_t i = 0; i < cfg.block_sizes[b]; ++i) out.labels.push_back(static_cast<int>(b));
  }

  // decoy group per node: the block shifted by one with probability
  // confound_strength, uniform otherwise. Own stream, so the unconfounded
  // generator is unchanged.
  std::vector<std::size_t> decoy;
  if (cfg.confound_strength > 0.0) {
    std::seed_seq seq{cfg.seed, std::uint64_t{0xdec0}};
    std::mt19937_64 drng(seq);
    std::uniform_int_distribution<std::size_t> pick_block(0, K - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = static_cast<std::size_t>(out.labels[i]);
      decoy.push_back(unif(drng) < cfg.confound_strength ? (b + 1) % K : pick_block(drng));
    }
  }

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double p = out.labels[i] == out.labels[j] ? cfg.p_in : cfg.p_out;
      // spurious links between blocks that share a decoy group
      if (!decoy.empty() && out.labels[i] != out.labels[j] && decoy[i] == decoy[j]) p += cfg.confound_p;
      if (unif(rng) < p) edges.push_back({i, j, 1.0});
    }
  }
  out.graph = Graph::from_edges(n, edges);

  out.features = FeatureMatrix(n, cfg.dep_dim + cfg.inv_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = static_cast<std::size_t>(out.labels[i]);
    for (std::size_t c = 0; c < cfg.dep_dim; ++c) {
      out.features(i, c) = (c == b ? 1.0 : 0.0) + cfg.noise_sigma * gauss(rng);
    }
    for (std::size_t c = 0; c < cfg.inv_dim; ++c) out.features(i, cfg.dep_dim + c) = gauss(rng);
    if (!decoy.empty()) out.features(i, cfg.dep_dim + decoy[i]) += cfg.confound_scale;
  }
  return out;
}

}  // namespace mecole
