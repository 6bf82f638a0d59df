#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "mecole/error.hpp"
#include "mecole/graph.hpp"

namespace mecole {

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

bool is_blank_or_comment(const std::string& line) {
  auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

// Splits on whitespace and commas.
std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool parse_index(const std::string& tok, std::size_t& out) {
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && p == tok.data() + tok.size();
}

bool parse_real(const std::string& tok, double& out) {
  // from_chars for double is available in libstdc++ 11
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && p == tok.data() + tok.size();
}

}  // namespace

Graph parse_edge_list(std::istream& in, std::optional<std::size_t> n_hint) {
  std::vector<Edge> edges;
  std::size_t max_id = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank_or_comment(line)) continue;
    std::istringstream ls(line);
    std::string a, b, extra;
    ls >> a >> b;
    std::size_t u = 0, v = 0;
    if (b.empty() || !parse_index(a, u) || !parse_index(b, v) || (ls >> extra)) {
      throw DataError("edge list: malformed line " + std::to_string(lineno) + ": '" + line + "'");
    }
    max_id = std::max({max_id, u, v});
    edges.push_back({u, v, 1.0});
  }
  if (edges.empty()) throw DataError("edge list: no edges");
  std::size_t n = max_id + 1;
  if (n_hint) {
    if (*n_hint < n) {
      throw DataError("edge list: node id " + std::to_string(max_id) + " exceeds n_hint " +
                      std::to_string(*n_hint));
    }
    n = *n_hint;
  }
  Graph g = Graph::from_edges(n, edges);
  if (g.num_edges() == 0) throw DataError("edge list: no edges after dropping self-loops");
  return g;
}

Graph load_edge_list(const std::string& path, std::optional<std::size_t> n_hint) {
  auto in = open_or_throw(path);
  return parse_edge_list(in, n_hint);
}

namespace {

std::vector<std::vector<double>> parse_rows(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank_or_comment(line)) continue;
    std::vector<double> row;
    for (const auto& tok : tokenize(line)) {
      double v = 0.0;
      if (!parse_real(tok, v)) {
        throw DataError("features: non-numeric token '" + tok + "' on line " + std::to_string(lineno));
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError("features: line " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                      " values, expected " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

FeatureMatrix parse_features(std::istream& in, std::size_t n) {
  auto rows = parse_rows(in);
  if (rows.size() != n) {
    throw DataError("features: row count mismatch (" + std::to_string(rows.size()) + " rows, expected " +
                    std::to_string(n) + ")");
  }
  FeatureMatrix m = Matrix::from_rows(rows);
  if (!m.all_finite()) throw DataError("features: non-finite value");
  return m;
}

FeatureMatrix load_features(const std::string& path, std::size_t n) {
  auto in = open_or_throw(path);
  return parse_features(in, n);
}

FeatureMatrix load_features(const std::string& path) {
  auto in = open_or_throw(path);
  FeatureMatrix m = Matrix::from_rows(parse_rows(in));
  if (!m.all_finite()) throw DataError("features: non-finite value");
  return m;
}

std::vector<int> parse_labels(std::istream& in) {
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank_or_comment(line)) continue;
    auto toks = tokenize(line);
    int v = 0;
    if (toks.size() != 1) throw DataError("labels: malformed line " + std::to_string(lineno));
    auto [p, ec] = std::from_chars(toks[0].data(), toks[0].data() + toks[0].size(), v);
    if (ec != std::errc{} || p != toks[0].data() + toks[0].size() || v < -1) {
      throw DataError("labels: malformed line " + std::to_string(lineno));
    }
    labels.push_back(v);
  }
  return labels;
}

std::vector<int> load_labels(const std::string& path) {
  auto in = open_or_throw(path);
  return parse_labels(in);
}

AttributeBag parse_attribute_bags(std::istream& bags, std::istream& vocabulary) {
  AttributeBag out;
  // bag lines may be empty (node without attributes), so blank lines count
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(bags, line)) {
    ++lineno;
    std::vector<std::size_t> bag;
    for (const auto& tok : tokenize(line)) {
      std::size_t t = 0;
      if (!parse_index(tok, t)) {
        throw DataError("attribute bags: bad token id '" + tok + "' on line " + std::to_string(lineno));
      }
      bag.push_back(t);
    }
    out.bags.push_back(std::move(bag));
  }
  out.vocabulary = Matrix::from_rows(parse_rows(vocabulary));
  out.validate();
  return out;
}

AttributeBag load_attribute_bags(const std::string& bags_path, const std::string& vocabulary_path) {
  auto b = open_or_throw(bags_path);
  auto v = open_or_throw(vocabulary_path);
  return parse_attribute_bags(b, v);
}

}  // namespace mecole
