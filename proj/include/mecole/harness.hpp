#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mecole/assignment.hpp"
#include "mecole/clustering.hpp"
#include "mecole/contrastive.hpp"
#include "mecole/decoupling.hpp"
#include "mecole/graph.hpp"

namespace mecole {

struct AblationFlags {
  bool no_decouple = false;
  bool neg_uniform = false;
  bool mlp_predictor = false;
  bool no_cl = false;
  bool graph_augment = false;
  bool drop_gv = false;
  bool drop_gx = false;
};

struct ExperimentConfig {
  // data: file inputs, or a generated SBM when edges is empty
  std::string edges;
  std::string features;
  std::string labels;
  std::vector<std::pair<std::string, std::string>> relations;  // extra relation graphs (G_V), name -> edge file
  std::string attribute_bags;
  std::string attribute_vocab;
  SBMConfig sbm{.block_sizes = {100, 100, 100, 100}};
  bool sbm_seed_fixed = false;  // otherwise the SBM is drawn from `seed`

  std::size_t k = 4;
  decouple::EncoderConfig encoder;

  std::size_t epochs = 100;
  double lr = 0.01;
  double clip_norm = 5.0;
  double alpha_ce = 1.0;
  std::size_t neg_ratio = 1;

  decouple::DiscrepancyMetric metric = decouple::DiscrepancyMetric::l2;
  std::size_t discrepancy_pairs = 256;
  double eta = 4.0;

  double tau = 0.5;
  double p_ce_start = 0.5;
  double p_ce_end = 0.2;
  std::size_t anchors_per_class = 32;
  std::size_t positives = 1;
  std::size_t negatives = 5;
  std::size_t pool_factor = 10;
  std::size_t virtual_per_anchor = 4;
  bool include_positive = false;

  std::size_t knn_k = 10;
  double eta_sim = 0.7;

  cluster::ModularityInitConfig init;
  cluster::UpdateOptions update;
  std::size_t update_every = 1;

  double augment_edge_drop = 0.2;
  double augment_feature_mask = 0.2;

  AblationFlags ablation;

  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  // ablation grid; empty means {seed}
  std::size_t jobs = 1;
  std::string out_dir;

  void set(const std::string& key, const std::string& value);
  // Flat key = value echo; keys appear in a fixed order.
  std::vector<std::pair<std::string, std::string>> echo() const;
  void validate() const;

  double p_ce_at(std::size_t epoch) const;
};

// Lines of `key = value`; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
// "key=value" override.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

struct EpochRecord {
  std::size_t epoch = 0;
  double p_ce = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double l_ce = 0.0;
  double total = 0.0;
};

struct MetricsReport {
  std::string variant = "baseline";
  std::uint64_t seed = 0;
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::vector<EpochRecord> epochs;
  double init_accuracy = 0.0;
  double init_nmi = 0.0;
  double accuracy = 0.0;
  double nmi = 0.0;
  double modularity = 0.0;
  double wall_clock_seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> config;
  std::string error;  // set only for failed grid cells

  bool ok() const { return error.empty(); }
};

// The evaluation inputs, before any ablation is applied.
struct Dataset {
  Graph graph;
  FeatureMatrix features;
  std::vector<int> labels;  // may be empty
  std::vector<std::pair<std::string, Graph>> relations;
  std::optional<AttributeBag> attributes;
};

Dataset load_dataset(const ExperimentConfig& cfg);

// Top ceil(fraction * n) nodes by degree removed (ties: lower id first),
// survivors reindexed in id order. Throws DataError when no edge remains.
Dataset remove_high_degree_nodes(const Dataset& d, double fraction);

struct TrainResult {
  MetricsReport report;
  Assignment assignment;
  decouple::DecoupledEmbeddings embeddings;
};

TrainResult train(const Dataset& data, const ExperimentConfig& cfg);

MetricsReport run_training(const ExperimentConfig& cfg);
MetricsReport sparse_eval(const ExperimentConfig& cfg, double fraction);

// Baseline, every single-flag variant, then one run per discrepancy metric,
// each over all seeds. Failing cells are reported, not thrown.
std::vector<MetricsReport> run_ablation_grid(const ExperimentConfig& cfg);

// ---- contrastive batch construction ------------------------------------------

// Node-level batches: anchors near cluster boundaries, neighbor positives,
// negatives drawn against virtual nodes (or uniform under neg_uniform).
std::vector<contrast::ContrastiveBatch> build_node_batches(const Graph& g, const Assignment& a,
                                                           const decouple::DecoupledEmbeddings& e,
                                                           const ExperimentConfig& cfg, double p_ce,
                                                           std::mt19937_64& rng);

// Two corrupted views stacked as rows [view1; view2]: the positive of v is
// its own copy n + v, negatives are uniform second-view nodes n + u, u != v.
std::vector<contrast::ContrastiveBatch> build_augment_batches(std::size_t n, const Assignment& a,
                                                              const ExperimentConfig& cfg, std::mt19937_64& rng);

Graph drop_edges(const Graph& g, double rate, std::mt19937_64& rng);
// Zeroes each feature column with probability `rate` (same mask for all rows).
FeatureMatrix mask_features(const FeatureMatrix& x, double rate, std::mt19937_64& rng);

// ---- output ------------------------------------------------------------------

std::string report_json(const MetricsReport& r);
void write_loss_csv(const MetricsReport& r, std::ostream& out);
void write_grid_csv(const std::vector<MetricsReport>& reports, std::ostream& out);
// metrics.json, losses.csv and assignments.csv under dir.
void write_outputs(const TrainResult& r, const std::string& dir);

}  // namespace mecole
