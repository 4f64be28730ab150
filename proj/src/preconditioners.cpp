#include "fsagp/preconditioners.h"

#include <cmath>

namespace fsagp {

den_mat_t Preconditioner::solve_mat(const den_mat_t& R) const {
  den_mat_t out(R.rows(), R.cols());
  for (Eigen::Index j = 0; j < R.cols(); ++j) out.col(j) = solve(R.col(j));
  return out;
}

den_mat_t Preconditioner::sample_probes(int num_probes, std::uint64_t seed) const {
  den_mat_t Z(size(), num_probes);
  for (int i = 0; i < num_probes; ++i) {
    rng_t rng = probe_rng(seed, static_cast<std::uint64_t>(i));
    Z.col(i) = sample(rng);
  }
  return Z;
}

DiagPrecond::DiagPrecond(vec_t d, std::array<vec_t, kNumCovParams> d_derivs)
    : d_(std::move(d)), d_derivs_(std::move(d_derivs)) {
  require((d_.array() > 0.0).all(), "diagonal preconditioner needs positive entries");
  sqrt_d_ = d_.cwiseSqrt();
  has_derivs_ = d_derivs_[0].size() == d_.size();
}

vec_t DiagPrecond::deriv_apply(int which, const vec_t& v) const {
  require(has_derivs_, "diagonal preconditioner built without derivatives");
  return d_derivs_[static_cast<size_t>(which)].cwiseProduct(v);
}

double DiagPrecond::deriv_trace(int which) const {
  require(has_derivs_, "diagonal preconditioner built without derivatives");
  return d_derivs_[static_cast<size_t>(which)].cwiseQuotient(d_).sum();
}

FitcPrecond::FitcPrecond(den_mat_t sigma_m, den_mat_t sigma_mn, vec_t d)
    : sigma_m_(std::move(sigma_m)), sigma_mn_(std::move(sigma_mn)), d_(std::move(d)) {
  require(sigma_m_.rows() == sigma_m_.cols(), "inducing block must be square");
  require(sigma_mn_.rows() == sigma_m_.rows(), "cross covariance row mismatch");
  require(sigma_mn_.cols() == d_.size(), "diagonal length mismatch");
  require((d_.array() > 0.0).all(), "diagonal part must be positive");
  sqrt_d_ = d_.cwiseSqrt();
  chol_m_.compute(sigma_m_);
  if (chol_m_.info() != Eigen::Success)
    throw NumericalError("preconditioner inducing block is not positive definite");
  den_mat_t core = sigma_m_ + sigma_mn_ * d_.cwiseInverse().asDiagonal() * sigma_mn_.transpose();
  chol_core_.compute(core);
  if (chol_core_.info() != Eigen::Success)
    throw NumericalError("preconditioner core matrix is not positive definite");
  const double logdet_core = 2.0 * chol_core_.matrixLLT().diagonal().array().log().sum();
  const double logdet_m = 2.0 * chol_m_.matrixLLT().diagonal().array().log().sum();
  logdet_ = logdet_core - logdet_m + d_.array().log().sum();
}

vec_t FitcPrecond::solve(const vec_t& r) const {
  vec_t t = r.cwiseQuotient(d_);
  return t - (sigma_mn_.transpose() * chol_core_.solve(sigma_mn_ * t)).cwiseQuotient(d_);
}

den_mat_t FitcPrecond::solve_mat(const den_mat_t& R) const {
  den_mat_t t = d_.cwiseInverse().asDiagonal() * R;
  return t - d_.cwiseInverse().asDiagonal() *
                 (sigma_mn_.transpose() * chol_core_.solve(den_mat_t(sigma_mn_ * t)));
}

vec_t FitcPrecond::sample(rng_t& rng) const {
  const vec_t e1 = gaussian_vector(rng, sigma_m_.rows());
  const vec_t e2 = gaussian_vector(rng, d_.size());
  return sigma_mn_.transpose() * chol_m_.matrixU().solve(e1) + sqrt_d_.cwiseProduct(e2);
}

std::unique_ptr<FitcPrecond> FitcPrecond::from_fsa(FsaModel& model, bool with_derivs) {
  auto p = std::make_unique<FitcPrecond>(model.sigma_m, model.sigma_mn,
                                         vec_t(model.sigma_s.diagonal()));
  if (!with_derivs) return p;
  p->has_derivs_ = true;
  p->A_ = model.A;
  p->d_diag_[0] = vec_t::Ones(model.n());
  p->d_diag_[1] = (p->d_.array() - model.params.sigma2).matrix() / model.params.sigma1_2;
  p->d_diag_[2] = model.deriv_sigma_s(2).diagonal();
  p->d_sigma_mn_[1] = model.sigma_mn / model.params.sigma1_2;
  p->d_sigma_mn_[2] = model.deriv_sigma_mn(2);
  p->d_sigma_m_[1] = model.sigma_m / model.params.sigma1_2;
  p->d_sigma_m_[2] = model.deriv_sigma_m(2);
  // diag(P^{-1}) = 1/d - colsq(L_core^{-1} sigma_mn) / d^2
  den_mat_t V = p->chol_core_.matrixL().solve(p->sigma_mn_);
  p->pinv_diag_ = (p->d_.array().inverse() -
                   V.colwise().squaredNorm().transpose().array() / p->d_.array().square())
                      .matrix();
  return p;
}

vec_t FitcPrecond::deriv_apply(int which, const vec_t& v) const {
  require(has_derivs_, "FITC preconditioner built without derivatives");
  vec_t out = d_diag_[static_cast<size_t>(which)].cwiseProduct(v);
  if (which == 0) return out;  // nugget only moves the diagonal
  const den_mat_t& B = d_sigma_mn_[static_cast<size_t>(which)];
  out += B.transpose() * (A_ * v) + A_.transpose() * (B * v);
  out -= A_.transpose() * (d_sigma_m_[static_cast<size_t>(which)] * (A_ * v));
  return out;
}

double FitcPrecond::deriv_trace(int which) const {
  require(has_derivs_, "FITC preconditioner built without derivatives");
  double acc = pinv_diag_.dot(d_diag_[static_cast<size_t>(which)]);
  if (which == 0) return acc;
  if (!V0_) V0_ = solve_mat(den_mat_t(A_.transpose()));
  if (!G_M_) G_M_ = A_ * (*V0_);
  acc += 2.0 * V0_->cwiseProduct(d_sigma_mn_[static_cast<size_t>(which)].transpose()).sum();
  acc -= G_M_->cwiseProduct(d_sigma_m_[static_cast<size_t>(which)]).sum();
  return acc;
}

den_mat_t pivoted_cholesky(vec_t diag, const std::function<vec_t(Eigen::Index)>& column,
                           Eigen::Index max_rank, double rel_tol) {
  const Eigen::Index n = diag.size();
  require(max_rank >= 1 && max_rank <= n, "rank must lie in [1, n]");
  const double tol = rel_tol * diag.maxCoeff();
  den_mat_t L(n, max_rank);
  Eigen::Index k = 0;
  for (; k < max_rank; ++k) {
    Eigen::Index p;
    const double dmax = diag.maxCoeff(&p);
    if (dmax <= tol) break;
    vec_t col = column(p);
    if (k > 0) col.noalias() -= L.leftCols(k) * L.row(p).head(k).transpose();
    L.col(k) = col / std::sqrt(dmax);
    diag -= L.col(k).cwiseAbs2();
    diag = diag.cwiseMax(0.0);
    diag[p] = 0.0;
  }
  return L.leftCols(k);
}

PivCholPrecond::PivCholPrecond(den_mat_t L, double sigma2) : L_(std::move(L)), sigma2_(sigma2) {
  require(sigma2_ > 0.0, "nugget must be positive");
  const Eigen::Index k = L_.cols();
  den_mat_t core = den_mat_t::Identity(k, k) + L_.transpose() * L_ / sigma2_;
  chol_core_.compute(core);
  if (chol_core_.info() != Eigen::Success)
    throw NumericalError("pivoted Cholesky core is not positive definite");
  logdet_ = 2.0 * chol_core_.matrixLLT().diagonal().array().log().sum() +
            static_cast<double>(L_.rows()) * std::log(sigma2_);
}

std::unique_ptr<PivCholPrecond> PivCholPrecond::from_fsa(FsaModel& model, Eigen::Index rank) {
  den_mat_t L = pivoted_cholesky(
      model.diag_no_nugget(), [&](Eigen::Index j) { return model.column_no_nugget(j); }, rank);
  return std::make_unique<PivCholPrecond>(std::move(L), model.params.sigma2);
}

vec_t PivCholPrecond::solve(const vec_t& r) const {
  return (r - L_ * chol_core_.solve(L_.transpose() * r) / sigma2_) / sigma2_;
}

den_mat_t PivCholPrecond::solve_mat(const den_mat_t& R) const {
  return (R - L_ * chol_core_.solve(den_mat_t(L_.transpose() * R)) / sigma2_) / sigma2_;
}

vec_t PivCholPrecond::sample(rng_t& rng) const {
  const vec_t e1 = gaussian_vector(rng, L_.cols());
  const vec_t e2 = gaussian_vector(rng, L_.rows());
  return L_ * e1 + std::sqrt(sigma2_) * e2;
}

}  // namespace fsagp
