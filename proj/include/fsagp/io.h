#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "fsagp/types.h"

namespace fsagp {

// Tabular spatial dataset: coordinate columns x1..xd, optional response y,
// optional covariate columns cov_*, optional train/test tag column.
struct Dataset {
  den_mat_t coords;
  vec_t y;
  den_mat_t covariates;
  std::vector<std::string> covariate_names;
  std::vector<std::string> tag;
  bool has_y = false;

  Eigen::Index n() const { return coords.rows(); }
  Eigen::Index dim() const { return coords.cols(); }
};

Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Dataset& ds);

// Number formatted with 17 significant digits (round-trips through strtod).
std::string format_double(double v);

// Flat sectioned key/value config file: [section] headers, key = value lines,
// '#' comments. Keys are exposed as "section.key".
class RunConfig {
 public:
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  // Rejects any key outside the known set (schema validation).
  void require_known(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace fsagp
