#include "fsagp/selected_inverse.h"

#include <algorithm>

namespace fsagp {

SelectedInverse::SelectedInverse(const Eigen::SimplicialLDLT<sp_mat_cm_t>& ldlt) {
  require(ldlt.info() == Eigen::Success, "selected inverse needs a successful factorization");
  const sp_mat_cm_t L = ldlt.matrixL();
  const vec_t D = ldlt.vectorD();
  n_ = L.rows();

  // permutationP() maps original indices to positions of the factored matrix.
  const auto& p = ldlt.permutationP().indices();
  perm_.assign(static_cast<size_t>(n_), 0);
  for (Eigen::Index i = 0; i < n_; ++i) perm_[static_cast<size_t>(i)] = p[i];

  // Strictly-lower pattern of L in CSC form.
  col_ptr_.assign(static_cast<size_t>(n_) + 1, 0);
  for (Eigen::Index j = 0; j < n_; ++j) {
    for (sp_mat_cm_t::InnerIterator it(L, j); it; ++it) {
      if (it.row() > j) ++col_ptr_[static_cast<size_t>(j) + 1];
    }
  }
  for (Eigen::Index j = 0; j < n_; ++j) col_ptr_[static_cast<size_t>(j) + 1] += col_ptr_[static_cast<size_t>(j)];
  row_idx_.assign(static_cast<size_t>(col_ptr_[static_cast<size_t>(n_)]), 0);
  std::vector<double> lval(row_idx_.size(), 0.0);
  {
    std::vector<Eigen::Index> fill(static_cast<size_t>(n_), 0);
    for (Eigen::Index j = 0; j < n_; ++j) {
      for (sp_mat_cm_t::InnerIterator it(L, j); it; ++it) {
        if (it.row() <= j) continue;
        auto slot = col_ptr_[static_cast<size_t>(j)] + fill[static_cast<size_t>(j)]++;
        row_idx_[static_cast<size_t>(slot)] = it.row();
        lval[static_cast<size_t>(slot)] = it.value();
      }
    }
  }

  val_.assign(row_idx_.size(), 0.0);
  diag_ = vec_t::Zero(n_);

  // Takahashi recurrences, columns processed from the last to the first:
  //   Z_ij = -sum_{k in struct(L(:,j)), k>j} L_kj Z_(k,i)   for i > j
  //   Z_jj = 1/D_j - sum_{k in struct(L(:,j)), k>j} L_kj Z_kj
  // Every referenced Z_(k,i) lies inside the filled pattern.
  for (Eigen::Index j = n_ - 1; j >= 0; --j) {
    const auto b = col_ptr_[static_cast<size_t>(j)], e = col_ptr_[static_cast<size_t>(j) + 1];
    for (Eigen::Index s = e - 1; s >= b; --s) {
      const Eigen::Index i = row_idx_[static_cast<size_t>(s)];
      double acc = 0.0;
      for (Eigen::Index t = b; t < e; ++t) {
        const Eigen::Index k = row_idx_[static_cast<size_t>(t)];
        acc += lval[static_cast<size_t>(t)] * lower_entry(std::max(k, i), std::min(k, i));
      }
      val_[static_cast<size_t>(s)] = -acc;
    }
    double acc = 1.0 / D[j];
    for (Eigen::Index t = b; t < e; ++t) {
      acc -= lval[static_cast<size_t>(t)] * val_[static_cast<size_t>(t)];
    }
    diag_[j] = acc;
  }
}

double SelectedInverse::lower_entry(Eigen::Index r, Eigen::Index c) const {
  if (r == c) return diag_[r];
  const auto b = col_ptr_[static_cast<size_t>(c)], e = col_ptr_[static_cast<size_t>(c) + 1];
  auto first = row_idx_.begin() + b, last = row_idx_.begin() + e;
  auto it = std::lower_bound(first, last, r);
  if (it == last || *it != r)
    throw NumericalError("selected inverse queried outside the factor pattern");
  return val_[static_cast<size_t>(b + (it - first))];
}

double SelectedInverse::entry(Eigen::Index i, Eigen::Index j) const {
  const Eigen::Index pi = perm_[static_cast<size_t>(i)], pj = perm_[static_cast<size_t>(j)];
  return lower_entry(std::max(pi, pj), std::min(pi, pj));
}

double SelectedInverse::trace_product(const sp_mat_t& B) const {
  double acc = 0.0;
  for (Eigen::Index r = 0; r < B.outerSize(); ++r) {
    for (sp_mat_t::InnerIterator it(B, r); it; ++it) {
      if (it.value() != 0.0) acc += it.value() * entry(it.row(), it.col());
    }
  }
  return acc;
}

vec_t SelectedInverse::diagonal() const {
  vec_t out(n_);
  for (Eigen::Index i = 0; i < n_; ++i) out[i] = diag_[perm_[static_cast<size_t>(i)]];
  return out;
}

}  // namespace fsagp
