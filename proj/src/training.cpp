#include <algorithm>
#include <chrono>
#include <cmath>
#include <atomic>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "mecole/error.hpp"
#include "mecole/harness.hpp"
#include "mecole/log.hpp"
#include "mecole/metrics.hpp"
#include "mecole/nn.hpp"

namespace mecole {

namespace {

// Independent reproducible substreams of one run seed.
std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

enum Stream : std::uint32_t { model = 1, init = 2, recon = 3, disc = 4, contrastive = 5, augment = 6 };

template <typename F>
auto with_epoch_context(std::size_t epoch, F&& f) {
  const std::string where = "epoch " + std::to_string(epoch) + ": ";
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(where + e.what());
  } catch (const DataError& e) {
    throw DataError(where + e.what());
  } catch (const NumericError& e) {
    throw NumericError(where + e.what());
  }
}

std::size_t nonempty_classes(const Assignment& a) {
  std::size_t count = 0;
  for (const auto& m : a.class_members(true)) count += m.empty() ? 0 : 1;
  return count;
}

struct Evaluation {
  double accuracy = 0.0;
  double nmi = 0.0;
};

Evaluation evaluate(const Assignment& a, const std::vector<int>& truth) {
  if (truth.empty()) return {};
  const auto pred = a.hard_labels();
  if (std::none_of(truth.begin(), truth.end(), [](int t) { return t >= 0; })) return {};
  return {metrics::clustering_accuracy(pred, truth), metrics::nmi(pred, truth)};
}

Graph attribute_graph(const AttributeBag& bags, const Assignment& a, const ExperimentConfig& cfg) {
  return build_knn_similarity_graph(tfidf_class_features(bags, a), cfg.knn_k, cfg.eta_sim);
}

}  // namespace

// ---- data ---------------------------------------------------------------------

Dataset load_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset d;
  if (cfg.edges.empty()) {
    SBMConfig sbm = cfg.sbm;
    if (!cfg.sbm_seed_fixed) sbm.seed = cfg.seed;
    SbmSample s = generate_sbm(sbm);
    d.graph = std::move(s.graph);
    d.features = std::move(s.features);
    d.labels = std::move(s.labels);
    return d;
  }
  std::optional<std::size_t> n;
  if (!cfg.features.empty()) {
    d.features = load_features(cfg.features);
    n = d.features.rows();
  }
  if (!cfg.labels.empty()) {
    d.labels = load_labels(cfg.labels);
    if (n && d.labels.size() != *n) throw DataError("labels: row count does not match features");
    n = d.labels.size();
  }
  d.graph = load_edge_list(cfg.edges, n);
  if (d.features.size() == 0) d.features = Matrix::identity(d.graph.num_nodes());  // featureless input
  if (!d.labels.empty() && d.labels.size() != d.graph.num_nodes())
    throw DataError("labels: row count does not match node count");
  for (const auto& [name, path] : cfg.relations) d.relations.emplace_back(name, load_edge_list(path, d.graph.num_nodes()));
  if (!cfg.attribute_bags.empty()) {
    d.attributes = load_attribute_bags(cfg.attribute_bags, cfg.attribute_vocab);
    if (d.attributes->bags.size() != d.graph.num_nodes()) throw DataError("attributes: bag count does not match node count");
  }
  return d;
}

Dataset remove_high_degree_nodes(const Dataset& d, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("sparse_eval: fraction must lie in [0, 1)");
  const std::size_t n = d.graph.num_nodes();
  const auto removed = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return d.graph.degree(a) > d.graph.degree(b); });
  std::vector<bool> drop(n, false);
  for (std::size_t i = 0; i < removed; ++i) drop[order[i]] = true;
  std::vector<NodeId> keep;
  for (NodeId u = 0; u < n; ++u)
    if (!drop[u]) keep.push_back(u);

  Dataset out;
  out.graph = d.graph.induced_subgraph(keep);
  if (out.graph.num_edges() == 0)
    throw DataError("sparse_eval: removing " + std::to_string(removed) + " nodes leaves no edges");
  out.features = Matrix(keep.size(), d.features.cols());
  for (std::size_t i = 0; i < keep.size(); ++i)
    std::copy_n(d.features.row(keep[i]).begin(), d.features.cols(), out.features.row(i).begin());
  for (NodeId u : keep)
    if (!d.labels.empty()) out.labels.push_back(d.labels[u]);
  for (const auto& [name, g] : d.relations) out.relations.emplace_back(name, g.induced_subgraph(keep));
  if (d.attributes) {
    AttributeBag a;
    a.vocabulary = d.attributes->vocabulary;
    for (NodeId u : keep) a.bags.push_back(d.attributes->bags[u]);
    out.attributes = std::move(a);
  }
  return out;
}

// ---- batches ------------------------------------------------------------------

std::vector<contrast::ContrastiveBatch> build_node_batches(const Graph& g, const Assignment& a,
                                                           const decouple::DecoupledEmbeddings& e,
                                                           const ExperimentConfig& cfg, double p_ce,
                                                           std::mt19937_64& rng) {
  std::vector<contrast::ContrastiveBatch> batches;
  for (NodeId v : contrast::sample_anchors(a, cfg.anchors_per_class, rng)) {
    if (g.degree(v) == 0 || g.degree(v) + 1 >= g.num_nodes()) continue;
    contrast::ContrastiveBatch b;
    b.anchor = v;
    b.tau = cfg.tau;
    b.positives = contrast::sample_positives(v, g, cfg.positives, rng);
    b.positive_probs.assign(b.positives.size(), 1.0 / static_cast<double>(b.positives.size()));
    contrast::NegativeSample neg;
    if (cfg.ablation.neg_uniform) {
      neg = contrast::sample_uniform_negatives(v, g, cfg.negatives, rng);
    } else {
      std::vector<contrast::VirtualNode> virt;
      for (std::size_t j = 0; j < cfg.virtual_per_anchor; ++j)
        virt.push_back(contrast::synthesize_virtual_node(v, a, e, p_ce, rng));
      neg = contrast::sample_negatives(virt, e, g, cfg.negatives, cfg.pool_factor * cfg.negatives, rng);
    }
    b.negatives = std::move(neg.nodes);
    b.negative_probs = std::move(neg.probs);
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<contrast::ContrastiveBatch> build_augment_batches(std::size_t n, const Assignment& a,
                                                              const ExperimentConfig& cfg, std::mt19937_64& rng) {
  if (n < 2) throw DataError("graph augment: needs at least two nodes");
  std::vector<contrast::ContrastiveBatch> batches;
  const std::size_t m = std::min(cfg.negatives, n - 1);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (NodeId v : contrast::sample_anchors(a, cfg.anchors_per_class, rng)) {
    contrast::ContrastiveBatch b;
    b.anchor = v;
    b.tau = cfg.tau;
    b.positives = {n + v};
    b.positive_probs = {1.0};
    std::vector<bool> taken(n, false);
    taken[v] = true;
    while (b.negatives.size() < m) {
      const std::size_t u = pick(rng);
      if (taken[u]) continue;
      taken[u] = true;
      b.negatives.push_back(n + u);
    }
    b.negative_probs.assign(m, 1.0 / static_cast<double>(m));
    batches.push_back(std::move(b));
  }
  return batches;
}

Graph drop_edges(const Graph& g, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution drop(rate);
  std::vector<Edge> kept;
  for (const Edge& e : g.edges())
    if (!drop(rng)) kept.push_back(e);
  return Graph::from_edges(g.num_nodes(), kept);
}

FeatureMatrix mask_features(const FeatureMatrix& x, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution mask(rate);
  FeatureMatrix out = x;
  for (std::size_t c = 0; c < x.cols(); ++c)
    if (mask(rng))
      for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) = 0.0;
  return out;
}

// ---- training -----------------------------------------------------------------

TrainResult train(const Dataset& data, const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Graph& g = data.graph;
  const FeatureMatrix& x = data.features;
  const std::size_t n = g.num_nodes();
  if (g.num_edges() == 0) throw DataError("train: graph has no edges");
  if (x.rows() != n) throw DataError("train: feature rows do not match node count");
  if (!x.all_finite()) throw DataError("train: non-finite features");
  const AblationFlags& flags = cfg.ablation;
  const bool decoupled = !flags.no_decouple;

  auto rng_model = stream(cfg.seed, Stream::model);
  auto rng_recon = stream(cfg.seed, Stream::recon);
  auto rng_disc = stream(cfg.seed, Stream::disc);
  auto rng_cl = stream(cfg.seed, Stream::contrastive);
  auto rng_aug = stream(cfg.seed, Stream::augment);

  // static auxiliary channels; G_M (attribute graph) follows the assignments
  GraphBundle bundle{g, {}};
  if (!flags.drop_gx && cfg.knn_k > 0) {
    KnnStats stats;
    Graph gx = build_knn_similarity_graph(x, cfg.knn_k, cfg.eta_sim, &stats);
    if (stats.zero_norm_rows) log::warn("G_X: ", stats.zero_norm_rows, " zero-norm feature rows left isolated");
    bundle.auxiliary.emplace_back("G_X", std::move(gx));
  }
  if (!flags.drop_gv)
    for (const auto& rel : data.relations) bundle.auxiliary.push_back(rel);
  bundle.validate();

  Assignment r = cluster::init_assignments(bundle, x, cfg.k, cfg.init, stream(cfg.seed, Stream::init)());
  MetricsReport report;
  report.seed = cfg.seed;
  report.num_nodes = n;
  report.num_edges = g.num_edges();
  report.config = cfg.echo();
  {
    const Evaluation ev = evaluate(r, data.labels);
    report.init_accuracy = ev.accuracy;
    report.init_nmi = ev.nmi;
  }
  log::info("init: accuracy ", report.init_accuracy, " nmi ", report.init_nmi);

  std::vector<SparseMatrix> aux;
  for (const auto& [name, ag] : bundle.auxiliary) aux.push_back(normalize_adjacency(ag));
  const bool has_attributes = data.attributes.has_value();
  if (has_attributes) aux.push_back(normalize_adjacency(attribute_graph(*data.attributes, r, cfg)));
  std::vector<const SparseMatrix*> aux_ptrs;
  for (const auto& s : aux) aux_ptrs.push_back(&s);

  decouple::EncoderConfig enc_cfg = cfg.encoder;
  enc_cfg.decouple = decoupled;
  nn::ParameterStore store;
  decouple::DecoupledEncoder encoder(store, x.cols(), aux.size(), enc_cfg, rng_model);
  std::optional<decouple::MlpLinkHead> head;
  if (flags.mlp_predictor) head.emplace(store, enc_cfg.dim_d, decoupled ? enc_cfg.dim_o : 0, 32, rng_model);
  nn::Adam adam({.lr = cfg.lr, .clip_norm = cfg.clip_norm});
  cluster::AssignmentUpdater updater(cfg.k, cfg.update);

  const SparseMatrix raw = normalize_adjacency(g);
  SparseMatrix rewired = raw;
  Matrix ho_prev;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    with_epoch_context(epoch, [&] {
      const double p_ce = cfg.p_ce_at(epoch);
      if (decoupled && ho_prev.cols() > 0) rewired = normalize_adjacency(decouple::rewire(g, ho_prev, cfg.eta).graph);
      const decouple::EncoderInputs inputs{&x, &rewired, &raw, aux_ptrs};

      ad::Tape tape;
      const decouple::EmbeddingVars ev = encoder.forward(tape, inputs);
      ad::Var l1 = decouple::reconstruction_loss(g, ev, cfg.neg_ratio, rng_recon, head ? &*head : nullptr);
      ad::Var l2 = tape.constant(Matrix(1, 1));
      if (decoupled && nonempty_classes(r) >= 2)
        l2 = decouple::discrepancy_loss(ev, r, cfg.metric, cfg.discrepancy_pairs, rng_disc);
      ad::Var total = ad::add(l1, l2);

      EpochRecord rec{.epoch = epoch, .p_ce = p_ce, .l1 = l1.scalar(), .l2 = l2.scalar()};
      // augmented views are referenced by the tape until backward
      std::optional<Graph> g1, g2;
      std::optional<FeatureMatrix> x1, x2;
      std::optional<SparseMatrix> a1, a2;
      if (!flags.no_cl) {
        std::optional<ad::Var> lce;
        if (flags.graph_augment) {
          g1 = drop_edges(g, cfg.augment_edge_drop, rng_aug);
          g2 = drop_edges(g, cfg.augment_edge_drop, rng_aug);
          x1 = mask_features(x, cfg.augment_feature_mask, rng_aug);
          x2 = mask_features(x, cfg.augment_feature_mask, rng_aug);
          a1 = normalize_adjacency(*g1);
          a2 = normalize_adjacency(*g2);
          const auto v1 = encoder.forward(tape, {&*x1, &*a1, &*a1, aux_ptrs});
          const auto v2 = encoder.forward(tape, {&*x2, &*a2, &*a2, aux_ptrs});
          const auto batches = build_augment_batches(n, r, cfg, rng_cl);
          if (!batches.empty())
            lce = contrast::contrastive_loss(batches, ad::concat_rows(v1.hd, v2.hd), cfg.include_positive);
        } else {
          const auto batches = build_node_batches(g, r, ev.values(), cfg, p_ce, rng_cl);
          if (!batches.empty()) lce = contrast::contrastive_loss(batches, ev.hd, cfg.include_positive);
        }
        if (lce) {
          rec.l_ce = lce->scalar();
          total = ad::add(total, ad::scale(*lce, cfg.alpha_ce));
        }
      }
      store.zero_grad();
      tape.backward(total);
      rec.total = total.scalar();
      adam.step(store);
      if (decoupled) ho_prev = ev.ho.value();

      if ((epoch + 1) % cfg.update_every == 0) {
        const auto e = encoder.encode(inputs);
        r = updater.update(e.hd, r);
        if (has_attributes) aux.back() = normalize_adjacency(attribute_graph(*data.attributes, r, cfg));
      }
      report.epochs.push_back(rec);
      if (log::threshold() >= log::Level::debug)
        log::debug("epoch ", epoch, " L1 ", rec.l1, " L2 ", rec.l2, " LCE ", rec.l_ce, " L ", rec.total, " acc ",
                   evaluate(r, data.labels).accuracy);
    });
  }

  for (const auto& p : store.all())
    if (p.name.ends_with(".mix")) {
      std::ostringstream os;
      for (double w : p.value.data()) os << ' ' << w;
      log::debug(p.name, " logits", os.str());
    }

  const decouple::EncoderInputs final_inputs{&x, &rewired, &raw, aux_ptrs};
  TrainResult result{std::move(report), r, encoder.encode(final_inputs)};
  const Evaluation ev = evaluate(result.assignment, data.labels);
  result.report.accuracy = ev.accuracy;
  result.report.nmi = ev.nmi;
  result.report.modularity = cluster::modularity(g, result.assignment.hard_labels());
  result.report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log::info("final: accuracy ", result.report.accuracy, " nmi ", result.report.nmi, " Q ", result.report.modularity);
  return result;
}

MetricsReport run_training(const ExperimentConfig& cfg) { return train(load_dataset(cfg), cfg).report; }

MetricsReport sparse_eval(const ExperimentConfig& cfg, double fraction) {
  return train(remove_high_degree_nodes(load_dataset(cfg), fraction), cfg).report;
}

// ---- ablation grid --------------------------------------------------------------

std::vector<MetricsReport> run_ablation_grid(const ExperimentConfig& base) {
  base.validate();
  struct Cell {
    std::string variant;
    ExperimentConfig cfg;
  };
  std::vector<std::pair<std::string, std::function<void(ExperimentConfig&)>>> variants = {
      {"baseline", [](ExperimentConfig&) {}},
      {"no_decouple", [](ExperimentConfig& c) { c.ablation.no_decouple = true; }},
      {"neg_uniform", [](ExperimentConfig& c) { c.ablation.neg_uniform = true; }},
      {"mlp_predictor", [](ExperimentConfig& c) { c.ablation.mlp_predictor = true; }},
      {"no_cl", [](ExperimentConfig& c) { c.ablation.no_cl = true; }},
      {"graph_augment", [](ExperimentConfig& c) { c.ablation.graph_augment = true; }},
      {"drop_gv", [](ExperimentConfig& c) { c.ablation.drop_gv = true; }},
      {"drop_gx", [](ExperimentConfig& c) { c.ablation.drop_gx = true; }},
  };
  for (auto m : {decouple::DiscrepancyMetric::l1, decouple::DiscrepancyMetric::l2, decouple::DiscrepancyMetric::cosine,
                 decouple::DiscrepancyMetric::linf})
    variants.emplace_back("metric_" + decouple::to_string(m), [m](ExperimentConfig& c) { c.metric = m; });

  const std::vector<std::uint64_t> seeds = base.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : base.seeds;
  std::vector<Cell> cells;
  for (const auto& [name, apply] : variants)
    for (std::uint64_t s : seeds) {
      Cell c{name, base};
      apply(c.cfg);
      c.cfg.seed = s;
      cells.push_back(std::move(c));
    }

  std::vector<MetricsReport> out(cells.size());
  auto run_cell = [&](std::size_t i) {
    const Cell& c = cells[i];
    try {
      out[i] = run_training(c.cfg);
    } catch (const std::exception& e) {
      out[i] = MetricsReport{};
      out[i].seed = c.cfg.seed;
      out[i].config = c.cfg.echo();
      out[i].error = e.what();
      log::warn("grid cell ", c.variant, " seed ", c.cfg.seed, " failed: ", e.what());
    }
    out[i].variant = c.variant;
  };

  // jobs share nothing mutable except their own output slot
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
  };
  std::vector<std::thread> pool;
  const std::size_t jobs = std::min(base.jobs, cells.size());
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace mecole
