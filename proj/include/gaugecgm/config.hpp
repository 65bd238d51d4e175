#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaugecgm {

/// Flat key/value configuration: one `key = value` per line, '#' comments.
/// Keys keep their dotted names (phi.kind, gauge.groups, ...). Ordered map so
/// iteration (and any emitted output) is deterministic.
using Config = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline Config parse_config_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    }
    cfg[key] = value;
  }
  return cfg;
}

inline Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline bool has_key(const Config& cfg, const std::string& key) {
  return cfg.count(key) > 0;
}

inline std::string get_string(const Config& cfg, const std::string& key,
                              const std::string& fallback = "") {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

inline double get_double(const Config& cfg, const std::string& key, double fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": not a number: " + it->second);
  }
}

inline long get_long(const Config& cfg, const std::string& key, long fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    return std::stol(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": not an integer: " + it->second);
  }
}

/// Group lists use 1-based indices, ';' between groups: "1 2; 2 3".
/// Returned indices are 0-based.
inline std::vector<std::vector<int>> parse_groups(const std::string& text) {
  std::vector<std::vector<int>> groups;
  std::istringstream in(text);
  std::string chunk;
  while (std::getline(in, chunk, ';')) {
    std::istringstream gs(chunk);
    std::vector<int> g;
    int idx;
    while (gs >> idx) {
      if (idx < 1) throw std::invalid_argument("gauge.groups: indices are 1-based");
      g.push_back(idx - 1);
    }
    if (!g.empty()) groups.push_back(std::move(g));
  }
  if (groups.empty()) throw std::invalid_argument("gauge.groups: no groups parsed");
  return groups;
}

/// Whitespace-separated dense text matrix: one row per line.
inline Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open matrix file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("matrix file is empty: " + path);
  Eigen::MatrixXd M(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) {
      throw std::runtime_error("matrix file has ragged rows: " + path);
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      M(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
  }
  return M;
}

inline Eigen::VectorXd load_vector(const std::string& path) {
  const Eigen::MatrixXd M = load_matrix(path);
  if (M.cols() == 1) return M.col(0);
  if (M.rows() == 1) return M.row(0).transpose();
  throw std::runtime_error("vector file must be a single row or column: " + path);
}

/// Grid file for sweeps: `key = v1 v2 v3` per line; the sweep runs the
/// cartesian product in file order.
inline std::vector<std::pair<std::string, std::vector<std::string>>> parse_grid_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid file: " + path);
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("grid line: expected key = values");
    const std::string key = detail::trim(line.substr(0, eq));
    std::istringstream vs(line.substr(eq + 1));
    std::vector<std::string> values;
    std::string tok;
    while (vs >> tok) values.push_back(tok);
    if (values.empty()) throw std::invalid_argument("grid key " + key + " has no values");
    grid.emplace_back(key, std::move(values));
  }
  if (grid.empty()) throw std::invalid_argument("grid file is empty");
  return grid;
}

}  // namespace gaugecgm
