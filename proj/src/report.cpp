#include <filesystem>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "mecole/error.hpp"
#include "mecole/harness.hpp"

namespace mecole {

std::string report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["num_nodes"] = r.num_nodes;
  j["num_edges"] = r.num_edges;
  j["init_accuracy"] = r.init_accuracy;
  j["init_nmi"] = r.init_nmi;
  j["accuracy"] = r.accuracy;
  j["nmi"] = r.nmi;
  j["modularity"] = r.modularity;
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  if (!r.ok()) j["error"] = r.error;
  auto& epochs = j["epochs"] = nlohmann::ordered_json::array();
  for (const EpochRecord& e : r.epochs) {
    nlohmann::ordered_json row;
    row["epoch"] = e.epoch;
    row["p_ce"] = e.p_ce;
    row["l1"] = e.l1;
    row["l2"] = e.l2;
    row["l_ce"] = e.l_ce;
    row["total"] = e.total;
    epochs.push_back(std::move(row));
  }
  auto& config = j["config"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.config) config[k] = v;
  return j.dump(2) + "\n";
}

void write_loss_csv(const MetricsReport& r, std::ostream& out) {
  const auto old = out.precision(17);
  out << "epoch,p_ce,l1,l2,l_ce,total\n";
  for (const EpochRecord& e : r.epochs)
    out << e.epoch << ',' << e.p_ce << ',' << e.l1 << ',' << e.l2 << ',' << e.l_ce << ',' << e.total << '\n';
  out.precision(old);
}

void write_grid_csv(const std::vector<MetricsReport>& reports, std::ostream& out) {
  const auto old = out.precision(6);
  out << "variant,seed,status,accuracy,nmi,modularity,init_accuracy,seconds\n";
  for (const MetricsReport& r : reports) {
    out << r.variant << ',' << r.seed << ',' << (r.ok() ? "ok" : "failed") << ',';
    if (r.ok())
      out << r.accuracy << ',' << r.nmi << ',' << r.modularity << ',' << r.init_accuracy << ','
          << r.wall_clock_seconds << '\n';
    else
      out << ",,,," << '\n';
  }
  out.precision(old);
}

void write_outputs(const TrainResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(dir) / name);
    if (!f) throw ConfigError("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  open("metrics.json") << report_json(r.report);
  auto losses = open("losses.csv");
  write_loss_csv(r.report, losses);
  auto assignments = open("assignments.csv");
  cluster::export_assignment_csv(r.assignment, assignments);
}

}  // namespace mecole
