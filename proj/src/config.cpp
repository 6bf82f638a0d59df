#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "mecole/error.hpp"
#include "mecole/harness.hpp"

namespace mecole {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

std::string fmt(bool b) { return b ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(xs[i]);
  }
  return s;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define MECOLE_STR(name, member)                                                         \
  Field {                                                                                \
    name, [](ExperimentConfig& c, const std::string&, const std::string& v) { c.member = v; }, \
        [](const ExperimentConfig& c) { return c.member; }                               \
  }
#define MECOLE_REAL(name, member)                                                                    \
  Field {                                                                                            \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
        [](const ExperimentConfig& c) { return fmt(c.member); }                                      \
  }
#define MECOLE_COUNT(name, member)                                                                   \
  Field {                                                                                            \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = to_uint(k, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }                           \
  }
#define MECOLE_FLAG(name, member)                                                                    \
  Field {                                                                                            \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
        [](const ExperimentConfig& c) { return fmt(c.member); }                                      \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      MECOLE_STR("data.edges", edges),
      MECOLE_STR("data.features", features),
      MECOLE_STR("data.labels", labels),
      Field{"data.relations",
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.relations.clear();
              for (const auto& item : split(v, ',')) {
                const auto eq = item.find('=');
                if (eq == std::string::npos)
                  c.relations.emplace_back("rel" + std::to_string(c.relations.size()), item);
                else
                  c.relations.emplace_back(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
              }
            },
            [](const ExperimentConfig& c) {
              std::string s;
              for (const auto& [name, path] : c.relations) s += (s.empty() ? "" : ",") + name + "=" + path;
              return s;
            }},
      MECOLE_STR("data.attribute_bags", attribute_bags),
      MECOLE_STR("data.attribute_vocab", attribute_vocab),
      Field{"sbm.blocks",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.sbm.block_sizes.clear();
              for (const auto& item : split(v, ',')) c.sbm.block_sizes.push_back(to_uint(k, item));
            },
            [](const ExperimentConfig& c) { return join(c.sbm.block_sizes); }},
      MECOLE_REAL("sbm.p_in", sbm.p_in),
      MECOLE_REAL("sbm.p_out", sbm.p_out),
      MECOLE_COUNT("sbm.dep_dim", sbm.dep_dim),
      MECOLE_COUNT("sbm.inv_dim", sbm.inv_dim),
      MECOLE_REAL("sbm.noise_sigma", sbm.noise_sigma),
      MECOLE_REAL("sbm.confound_strength", sbm.confound_strength),
      MECOLE_REAL("sbm.confound_scale", sbm.confound_scale),
      MECOLE_REAL("sbm.confound_p", sbm.confound_p),
      Field{"sbm.seed",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "run") {
                c.sbm_seed_fixed = false;
              } else {
                c.sbm.seed = to_uint(k, v);
                c.sbm_seed_fixed = true;
              }
            },
            [](const ExperimentConfig& c) { return c.sbm_seed_fixed ? std::to_string(c.sbm.seed) : "run"; }},
      MECOLE_COUNT("model.k", k),
      MECOLE_COUNT("model.hidden", encoder.hidden),
      MECOLE_COUNT("model.dim_d", encoder.dim_d),
      MECOLE_COUNT("model.dim_o", encoder.dim_o),
      MECOLE_COUNT("train.epochs", epochs),
      MECOLE_REAL("train.lr", lr),
      MECOLE_REAL("train.clip_norm", clip_norm),
      MECOLE_REAL("train.alpha_ce", alpha_ce),
      MECOLE_COUNT("train.neg_ratio", neg_ratio),
      MECOLE_COUNT("train.seed", seed),
      Field{"train.seeds",
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.seeds.clear();
              for (const auto& item : split(v, ',')) c.seeds.push_back(to_uint(k, item));
            },
            [](const ExperimentConfig& c) { return join(c.seeds); }},
      MECOLE_COUNT("train.jobs", jobs),
      Field{"decouple.metric",
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.metric = decouple::parse_metric(v); },
            [](const ExperimentConfig& c) { return decouple::to_string(c.metric); }},
      MECOLE_COUNT("decouple.pairs", discrepancy_pairs),
      MECOLE_REAL("decouple.eta", eta),
      MECOLE_REAL("contrastive.tau", tau),
      MECOLE_REAL("contrastive.p_ce_start", p_ce_start),
      MECOLE_REAL("contrastive.p_ce_end", p_ce_end),
      MECOLE_COUNT("contrastive.anchors_per_class", anchors_per_class),
      MECOLE_COUNT("contrastive.positives", positives),
      MECOLE_COUNT("contrastive.negatives", negatives),
      MECOLE_COUNT("contrastive.pool_factor", pool_factor),
      MECOLE_COUNT("contrastive.virtual_per_anchor", virtual_per_anchor),
      MECOLE_FLAG("contrastive.include_positive", include_positive),
      MECOLE_COUNT("graph.knn_k", knn_k),
      MECOLE_REAL("graph.eta_sim", eta_sim),
      MECOLE_COUNT("init.epochs", init.epochs),
      MECOLE_REAL("init.lr", init.lr),
      MECOLE_REAL("init.collapse_weight", init.collapse_weight),
      MECOLE_COUNT("init.hidden", init.hidden),
      MECOLE_REAL("cluster.q", update.q),
      MECOLE_REAL("cluster.relevance_floor", update.relevance_floor),
      MECOLE_REAL("cluster.l2", update.l2),
      MECOLE_COUNT("cluster.steps", update.steps),
      MECOLE_COUNT("cluster.update_every", update_every),
      MECOLE_REAL("augment.edge_drop", augment_edge_drop),
      MECOLE_REAL("augment.feature_mask", augment_feature_mask),
      MECOLE_FLAG("ablation.no_decouple", ablation.no_decouple),
      MECOLE_FLAG("ablation.neg_uniform", ablation.neg_uniform),
      MECOLE_FLAG("ablation.mlp_predictor", ablation.mlp_predictor),
      MECOLE_FLAG("ablation.no_cl", ablation.no_cl),
      MECOLE_FLAG("ablation.graph_augment", ablation.graph_augment),
      MECOLE_FLAG("ablation.drop_gv", ablation.drop_gv),
      MECOLE_FLAG("ablation.drop_gx", ablation.drop_gx),
      MECOLE_STR("output.dir", out_dir),
  };
  return table;
}

#undef MECOLE_STR
#undef MECOLE_REAL
#undef MECOLE_COUNT
#undef MECOLE_FLAG

void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

bool unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  // p_ce alone pins the schedule to a constant
  if (key == "contrastive.p_ce") {
    p_ce_start = p_ce_end = to_double(key, value);
    return;
  }
  for (const Field& f : fields())
    if (key == f.key) {
      f.set(*this, key, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

void ExperimentConfig::validate() const {
  check(k >= 2, "model.k must be at least 2");
  check(encoder.hidden > 0 && encoder.dim_d > 0 && encoder.dim_o > 0, "model dimensions must be positive");
  check(epochs >= 1, "train.epochs must be at least 1");
  check(lr > 0.0, "train.lr must be positive");
  check(clip_norm >= 0.0, "train.clip_norm must be non-negative");
  check(alpha_ce >= 0.0, "train.alpha_ce must be non-negative");
  check(discrepancy_pairs >= 1, "decouple.pairs must be at least 1");
  check(eta > 0.0, "decouple.eta must be positive");
  check(tau > 0.0, "contrastive.tau must be positive");
  check(p_ce_start > 0.0 && p_ce_start <= 1.0 && p_ce_end > 0.0 && p_ce_end <= 1.0,
        "contrastive.p_ce must lie in (0, 1]");
  check(positives >= 1 && negatives >= 1 && virtual_per_anchor >= 1 && pool_factor >= 1,
        "contrastive counts must be at least 1");
  check(eta_sim >= -1.0 && eta_sim <= 1.0, "graph.eta_sim must lie in [-1, 1]");
  check(init.epochs >= 1 && init.lr > 0.0 && init.collapse_weight >= 0.0 && init.hidden > 0, "invalid init settings");
  check(update.q > 0.0 && update.q <= 1.0, "cluster.q must lie in (0, 1]");
  check(update.relevance_floor < 0.0 || unit(update.relevance_floor), "cluster.relevance_floor must lie in [0, 1]");
  check(update.l2 >= 0.0 && update.steps >= 1 && update_every >= 1, "invalid cluster settings");
  check(unit(augment_edge_drop) && augment_edge_drop < 1.0, "augment.edge_drop must lie in [0, 1)");
  check(unit(augment_feature_mask) && augment_feature_mask < 1.0, "augment.feature_mask must lie in [0, 1)");
  check(jobs >= 1, "train.jobs must be at least 1");
  if (edges.empty()) {
    check(!sbm.block_sizes.empty(), "sbm.blocks must not be empty");
    check(unit(sbm.p_in) && unit(sbm.p_out), "sbm probabilities must lie in [0, 1]");
    check(unit(sbm.confound_strength), "sbm.confound_strength must lie in [0, 1]");
  }
  check(attribute_bags.empty() == attribute_vocab.empty(), "attribute bags and vocabulary must be given together");
}

double ExperimentConfig::p_ce_at(std::size_t epoch) const {
  if (epochs <= 1) return p_ce_start;
  const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return p_ce_start + (p_ce_end - p_ce_start) * t;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  cfg.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

}  // namespace mecole
