#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mecole/clustering.hpp"
#include "mecole/error.hpp"
#include "mecole/harness.hpp"
#include "mecole/log.hpp"
#include "mecole/metrics.hpp"

namespace fs = std::filesystem;
using namespace mecole;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value config file");
  app->add_option("--seed", c.seed, "run seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--set", c.overrides, "key=value override (repeatable)");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir);
  std::ofstream f(fs::path(dir) / name);
  if (!f) throw ConfigError("cannot write " + (fs::path(dir) / name).string());
  return f;
}

std::string summary(const MetricsReport& r) {
  std::ostringstream os;
  os << "accuracy=" << r.accuracy << " nmi=" << r.nmi << " modularity=" << r.modularity
     << " init_accuracy=" << r.init_accuracy << " seconds=" << r.wall_clock_seconds;
  return os.str();
}

std::vector<int> read_argmax_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("node_id,argmax", 0) != 0) throw DataError(path + ": not an assignment export");
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, arg;
    if (!std::getline(row, id, ',') || !std::getline(row, arg, ','))
      throw DataError(path + ": malformed line " + std::to_string(lineno));
    try {
      labels.push_back(std::stoi(arg));
    } catch (const std::exception&) {
      throw DataError(path + ": malformed line " + std::to_string(lineno));
    }
  }
  return labels;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mecole: decoupled contrastive node clustering"};
  app.require_subcommand(1);

  Common train_opts, ablate_opts, sparse_opts, sbm_opts;
  auto* train_cmd = app.add_subcommand("train", "train on a dataset or generated SBM");
  add_common(train_cmd, train_opts);

  auto* ablate_cmd = app.add_subcommand("ablate", "run the ablation and discrepancy-metric grid");
  add_common(ablate_cmd, ablate_opts);

  double fraction = 0.3;
  bool compare = false;
  auto* sparse_cmd = app.add_subcommand("sparse-eval", "retrain after removing the highest-degree nodes");
  add_common(sparse_cmd, sparse_opts);
  sparse_cmd->add_option("--fraction", fraction, "fraction of nodes to remove")->capture_default_str();
  sparse_cmd->add_flag("--compare", compare, "also train on the full graph and report the drop");

  auto* sbm_cmd = app.add_subcommand("gen-sbm", "write a stochastic block model dataset");
  add_common(sbm_cmd, sbm_opts);

  std::string assignments_path, labels_path, edges_path;
  auto* eval_cmd = app.add_subcommand("eval", "score a saved assignment export");
  eval_cmd->add_option("--assignments", assignments_path, "assignments.csv")->required();
  eval_cmd->add_option("--labels", labels_path, "ground-truth labels, one per line")->required();
  eval_cmd->add_option("--edges", edges_path, "edge list for modularity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) {
      const ExperimentConfig cfg = resolve(train_opts);
      const TrainResult r = train(load_dataset(cfg), cfg);
      if (!cfg.out_dir.empty()) write_outputs(r, cfg.out_dir);
      std::cout << summary(r.report) << '\n';
    } else if (*ablate_cmd) {
      const ExperimentConfig cfg = resolve(ablate_opts);
      const auto reports = run_ablation_grid(cfg);
      write_grid_csv(reports, std::cout);
      if (!cfg.out_dir.empty()) {
        auto grid = open_out(cfg.out_dir, "grid.csv");
        write_grid_csv(reports, grid);
        auto all = open_out(cfg.out_dir, "reports.jsonl");
        for (const auto& r : reports) all << nlohmann::json::parse(report_json(r)).dump() << '\n';
      }
    } else if (*sparse_cmd) {
      const ExperimentConfig cfg = resolve(sparse_opts);
      const Dataset full = load_dataset(cfg);
      const TrainResult sparse = train(remove_high_degree_nodes(full, fraction), cfg);
      if (!cfg.out_dir.empty()) write_outputs(sparse, cfg.out_dir);
      std::cout << "sparse " << summary(sparse.report) << '\n';
      if (compare) {
        const TrainResult dense = train(full, cfg);
        std::cout << "full " << summary(dense.report) << '\n';
        std::cout << "accuracy_drop=" << dense.report.accuracy - sparse.report.accuracy << '\n';
      }
    } else if (*sbm_cmd) {
      const ExperimentConfig cfg = resolve(sbm_opts);
      if (cfg.out_dir.empty()) throw ConfigError("gen-sbm needs --out");
      SBMConfig sc = cfg.sbm;
      if (!cfg.sbm_seed_fixed) sc.seed = cfg.seed;
      const SbmSample s = generate_sbm(sc);
      auto edges = open_out(cfg.out_dir, "edges.txt");
      for (const Edge& e : s.graph.edges()) edges << e.u << ' ' << e.v << '\n';
      auto feats = open_out(cfg.out_dir, "features.txt");
      feats.precision(17);
      for (std::size_t i = 0; i < s.features.rows(); ++i) {
        for (std::size_t c = 0; c < s.features.cols(); ++c) feats << (c ? " " : "") << s.features(i, c);
        feats << '\n';
      }
      auto labels = open_out(cfg.out_dir, "labels.txt");
      for (int l : s.labels) labels << l << '\n';
      std::cout << "wrote " << s.graph.num_nodes() << " nodes, " << s.graph.num_edges() << " edges to " << cfg.out_dir
                << '\n';
    } else if (*eval_cmd) {
      const auto pred = read_argmax_column(assignments_path);
      const auto truth = load_labels(labels_path);
      nlohmann::ordered_json j;
      j["accuracy"] = metrics::clustering_accuracy(pred, truth);
      j["nmi"] = metrics::nmi(pred, truth);
      if (!edges_path.empty()) j["modularity"] = cluster::modularity(load_edge_list(edges_path, pred.size()), pred);
      std::cout << j.dump(2) << '\n';
    }
  } catch (const ConfigError& e) {
    log::error(e.what());
    return 1;
  } catch (const DataError& e) {
    log::error(e.what());
    return 2;
  } catch (const NumericError& e) {
    log::error(e.what());
    return 3;
  } catch (const std::exception& e) {
    log::error(e.what());
    return 2;
  }
  return 0;
}
