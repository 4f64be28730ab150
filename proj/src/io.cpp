#include "fsagp/io.h"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fsagp {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& tok, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE) {
    throw std::invalid_argument("invalid numeric value '" + tok + "' in " + where);
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open data file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty data file: " + path);
  const std::vector<std::string> header = split_csv_line(line);

  std::vector<int> coord_col(header.size(), -1);
  int y_col = -1;
  int tag_col = -1;
  std::vector<int> cov_cols;
  std::vector<std::string> cov_names;
  int dim = 0;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string& name = header[j];
    if (name == "y") {
      if (y_col >= 0) throw std::invalid_argument("duplicate column 'y' in " + path);
      y_col = static_cast<int>(j);
    } else if (name == "tag") {
      if (tag_col >= 0) throw std::invalid_argument("duplicate column 'tag' in " + path);
      tag_col = static_cast<int>(j);
    } else if (name.rfind("cov_", 0) == 0) {
      cov_cols.push_back(static_cast<int>(j));
      cov_names.push_back(name);
    } else if (name.size() >= 2 && name[0] == 'x') {
      int idx = 0;
      try {
        idx = std::stoi(name.substr(1));
      } catch (const std::exception&) {
        throw std::invalid_argument("unknown column '" + name + "' in " + path);
      }
      if (idx < 1 || idx > 16) {
        throw std::invalid_argument("coordinate column '" + name + "' out of range in " + path);
      }
      coord_col[static_cast<std::size_t>(idx - 1)] = static_cast<int>(j);
      dim = std::max(dim, idx);
    } else {
      throw std::invalid_argument("unknown column '" + name + "' in " + path);
    }
  }
  if (dim == 0) throw std::invalid_argument("no coordinate columns x1..xd in " + path);
  for (int k = 0; k < dim; ++k) {
    if (coord_col[static_cast<std::size_t>(k)] < 0) {
      throw std::invalid_argument("missing coordinate column 'x" + std::to_string(k + 1) +
                                  "' in " + path);
    }
  }

  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> toks = split_csv_line(line);
    if (toks.size() != header.size()) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(toks.size()));
    }
    rows.push_back(std::move(toks));
  }

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  ds.coords.resize(n, dim);
  ds.has_y = y_col >= 0;
  if (ds.has_y) ds.y.resize(n);
  ds.covariates.resize(n, static_cast<Eigen::Index>(cov_cols.size()));
  ds.covariate_names = cov_names;
  if (tag_col >= 0) ds.tag.resize(static_cast<std::size_t>(n));

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& toks = rows[static_cast<std::size_t>(i)];
    const std::string where = path + ":" + std::to_string(i + 2);
    for (int k = 0; k < dim; ++k) {
      ds.coords(i, k) = parse_double(toks[static_cast<std::size_t>(coord_col[static_cast<std::size_t>(k)])], where);
    }
    if (y_col >= 0) ds.y(i) = parse_double(toks[static_cast<std::size_t>(y_col)], where);
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      ds.covariates(i, static_cast<Eigen::Index>(c)) =
          parse_double(toks[static_cast<std::size_t>(cov_cols[c])], where);
    }
    if (tag_col >= 0) ds.tag[static_cast<std::size_t>(i)] = toks[static_cast<std::size_t>(tag_col)];
  }
  if (ds.coords.size() > 0 && !ds.coords.allFinite()) {
    throw std::invalid_argument("non-finite coordinate in " + path);
  }
  if (ds.has_y && ds.y.size() > 0 && !ds.y.allFinite()) {
    throw std::invalid_argument("non-finite response in " + path);
  }
  return ds;
}

void write_dataset_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write data file: " + path);
  for (Eigen::Index k = 0; k < ds.dim(); ++k) {
    if (k > 0) out << ',';
    out << 'x' << (k + 1);
  }
  if (ds.has_y) out << ",y";
  for (const auto& name : ds.covariate_names) out << ',' << name;
  if (!ds.tag.empty()) out << ",tag";
  out << '\n';
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index k = 0; k < ds.dim(); ++k) {
      if (k > 0) out << ',';
      out << format_double(ds.coords(i, k));
    }
    if (ds.has_y) out << ',' << format_double(ds.y(i));
    for (Eigen::Index c = 0; c < ds.covariates.cols(); ++c) {
      out << ',' << format_double(ds.covariates(i, c));
    }
    if (!ds.tag.empty()) out << ',' << ds.tag[static_cast<std::size_t>(i)];
    out << '\n';
  }
  if (!out) throw std::invalid_argument("write failed: " + path);
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                    ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": empty section name");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": empty key");
    }
    if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                              (value.front() == '\'' && value.back() == '\''))) {
      value = value.substr(1, value.size() - 2);
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.kv_.count(full) > 0) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": duplicate key '" +
                                  full + "'");
    }
    cfg.kv_[full] = value;
  }
  return cfg;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  return parse_double(it->second, "config key '" + key + "'");
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const double v = parse_double(it->second, "config key '" + key + "'");
  const int r = static_cast<int>(v);
  if (static_cast<double>(r) != v) {
    throw std::invalid_argument("config key '" + key + "' expects an integer, got '" +
                                it->second + "'");
  }
  return r;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const double v = parse_double(it->second, "config key '" + key + "'");
  if (v < 0 || static_cast<double>(static_cast<std::uint64_t>(v)) != v) {
    throw std::invalid_argument("config key '" + key + "' expects a non-negative integer");
  }
  return static_cast<std::uint64_t>(v);
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::invalid_argument("config key '" + key + "' expects true/false, got '" + it->second +
                              "'");
}

std::vector<double> RunConfig::get_double_list(const std::string& key,
                                               const std::vector<double>& fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(parse_double(tok, "config key '" + key + "'"));
  }
  if (out.empty()) {
    throw std::invalid_argument("config key '" + key + "' expects a comma-separated list");
  }
  return out;
}

void RunConfig::require_known(const std::set<std::string>& known) const {
  for (const auto& [key, value] : kv_) {
    (void)value;
    if (known.count(key) == 0) {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
}

}  // namespace fsagp
