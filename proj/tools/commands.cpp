#include "commands.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsagp/estimation.h"
#include "fsagp/fsa.h"
#include "fsagp/inducing.h"
#include "fsagp/kernels.h"
#include "fsagp/krylov.h"
#include "fsagp/prediction.h"
#include "fsagp/preconditioners.h"
#include "fsagp/vecchia.h"

namespace fsagp::cli {

namespace {

using nlohmann::json;

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

MaternNu nu_from_config(const RunConfig& cfg) {
  return matern_nu_from_value(cfg.get_double("kernel.nu", 1.5));
}

// model.rho wins; otherwise model.effective_range (distance where the
// correlation drops to 0.05) is converted to a range parameter.
double rho_from_config(const RunConfig& cfg, MaternNu nu) {
  if (cfg.has("model.rho")) return cfg.get_double("model.rho", 0.1);
  const double er = cfg.get_double("model.effective_range", 0.2);
  return rho_for_correlation_at(er, 0.05, nu);
}

CovParams params_from_config(const RunConfig& cfg, MaternNu nu) {
  CovParams p;
  p.sigma2 = cfg.get_double("model.sigma2", 1.0);
  p.sigma1_2 = cfg.get_double("model.sigma1_2", 1.0);
  p.rho = rho_from_config(cfg, nu);
  return p;
}

TaperSpec taper_from_config(const RunConfig& cfg, Eigen::Index n) {
  TaperSpec taper;
  taper.family = taper_family_from_string(cfg.get_string("fsa.taper", "wendland1"));
  taper.gamma = cfg.get_double("fsa.gamma", 0.0);
  if (taper.gamma <= 0.0) {
    taper.gamma = gamma_for_avg_row_nnz(n, cfg.get_double("fsa.target_row_nnz", 40.0));
  }
  return taper;
}

Dataset load_or_simulate(const RunConfig& cfg, MaternNu nu) {
  if (cfg.has("data.path")) return read_dataset_csv(cfg.get_string("data.path", ""));
  const auto n = static_cast<Eigen::Index>(cfg.get_int("data.n", 0));
  require(n > 0, "set data.path or a positive data.n");
  const auto dim = static_cast<Eigen::Index>(cfg.get_int("data.dim", 2));
  const std::uint64_t seed = cfg.get_u64("data.seed", 1);
  LocationSet locs = uniform_locations(n, dim, seed);
  CovParams params = params_from_config(cfg, nu);
  Dataset ds;
  ds.coords = locs.coords;
  ds.has_y = true;
  const den_mat_t X(n, 0);
  if (n <= 20000) {
    ds.y = simulate_gp(locs, KernelSpec{nu}, params, X, seed + 1).y;
  } else {
    TaperSpec taper = taper_from_config(cfg, n);
    LocationSet ind = select_kmeanspp(locs, cfg.get_int("fsa.m", 200), seed);
    FsaModel model = FsaModel::assemble(locs, ind, KernelSpec{nu}, taper, params);
    ds.y = simulate_fsa(model, X, vec_t(), seed + 1);
  }
  return ds;
}

json params_json(const CovParams& p) {
  return json{{"sigma2", p.sigma2}, {"sigma1_2", p.sigma1_2}, {"rho", p.rho}};
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write output file: " + path);
  out << j.dump(2) << '\n';
}

std::unique_ptr<Preconditioner> build_precond(FsaModel& model, const std::string& name,
                                              Eigen::Index rank) {
  return make_preconditioner(model, precond_type_from_string(name), rank);
}

void print_markdown_table(const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (const auto& c : cells) s += " " + c + " |";
    return s;
  };
  std::cout << line(header) << '\n';
  std::vector<std::string> dashes(header.size(), "---");
  std::cout << line(dashes) << '\n';
  for (const auto& r : rows) std::cout << line(r) << '\n';
}

void write_csv_table(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write output file: " + path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out << ',';
      out << r[j];
    }
    out << '\n';
  }
}

}  // namespace

int cmd_simulate(const RunConfig& cfg) {
  cfg.require_known({"data.n", "data.dim", "data.seed", "data.out", "kernel.nu", "model.sigma2",
                     "model.sigma1_2", "model.rho", "model.effective_range", "model.beta",
                     "sim.method", "fsa.m", "fsa.gamma", "fsa.target_row_nnz", "fsa.taper",
                     "fsa.seed"});
  const auto n = static_cast<Eigen::Index>(cfg.get_int("data.n", 0));
  require(n > 0, "data.n must be positive");
  const auto dim = static_cast<Eigen::Index>(cfg.get_int("data.dim", 2));
  require(dim >= 1 && dim <= 16, "data.dim must be in [1, 16]");
  const std::uint64_t seed = cfg.get_u64("data.seed", 1);
  const std::string out_path = cfg.get_string("data.out", "");
  require(!out_path.empty(), "data.out is required");
  const MaternNu nu = nu_from_config(cfg);

  LocationSet locs = uniform_locations(n, dim, seed);

  Dataset ds;
  ds.coords = locs.coords;
  ds.has_y = true;

  den_mat_t X(n, 0);
  vec_t beta;
  if (cfg.has("model.beta")) {
    const std::vector<double> b = cfg.get_double_list("model.beta", {});
    require(static_cast<Eigen::Index>(b.size()) == dim + 1,
            "model.beta needs one intercept plus one coefficient per coordinate");
    beta = Eigen::Map<const vec_t>(b.data(), static_cast<Eigen::Index>(b.size()));
    X.resize(n, dim + 1);
    X.col(0).setOnes();
    X.rightCols(dim) = locs.coords;
    ds.covariates = X;
    ds.covariate_names.push_back("cov_const");
    for (Eigen::Index k = 0; k < dim; ++k) {
      ds.covariate_names.push_back("cov_x" + std::to_string(k + 1));
    }
  }

  const double sigma1_2 = cfg.get_double("model.sigma1_2", 1.0);
  if (sigma1_2 == 0.0) {
    // Pure-noise limit: the latent field vanishes.
    const double sigma2 = cfg.get_double("model.sigma2", 1.0);
    require(sigma2 > 0.0, "model.sigma2 must be positive");
    rng_t rng(seed + 1);
    ds.y = std::sqrt(sigma2) * gaussian_vector(rng, n);
    if (beta.size() > 0) ds.y += X * beta;
  } else {
    CovParams params = params_from_config(cfg, nu);
    params.beta = beta;
    params.validate();
    const std::string method = cfg.get_string("sim.method", "exact");
    if (method == "exact") {
      ds.y = simulate_gp(locs, KernelSpec{nu}, params, X, seed + 1).y;
    } else if (method == "fsa") {
      TaperSpec taper = taper_from_config(cfg, n);
      LocationSet ind =
          select_kmeanspp(locs, cfg.get_int("fsa.m", 200), cfg.get_u64("fsa.seed", seed));
      FsaModel model = FsaModel::assemble(locs, ind, KernelSpec{nu}, taper, params);
      ds.y = simulate_fsa(model, X, beta, seed + 1);
    } else {
      throw std::invalid_argument("sim.method must be exact or fsa");
    }
  }

  write_dataset_csv(out_path, ds);
  std::cout << "wrote " << n << " rows to " << out_path << '\n';
  return 0;
}

int cmd_fit(const RunConfig& cfg) {
  cfg.require_known({"data.path", "out.path", "fit.backend", "kernel.nu", "fsa.m", "fsa.gamma",
                     "fsa.target_row_nnz", "fsa.taper", "precond.type", "precond.rank",
                     "slq.probes", "slq.cv", "slq.seed", "cg.tol", "cg.max_iter",
                     "opt.max_evals", "opt.grad_tol_per_n"});
  const std::string data_path = cfg.get_string("data.path", "");
  require(!data_path.empty(), "data.path is required");
  const Dataset ds = read_dataset_csv(data_path);
  if (!ds.has_y) {
    throw std::invalid_argument("data file " + data_path + " has no response column 'y'");
  }

  FitOptions opts;
  const std::string backend = cfg.get_string("fit.backend", "iterative");
  if (backend == "cholesky") {
    opts.backend = FitBackend::exact;
  } else if (backend == "iterative") {
    opts.backend = FitBackend::iterative;
  } else {
    throw std::invalid_argument("fit.backend must be cholesky or iterative");
  }
  opts.kernel.nu = nu_from_config(cfg);
  opts.taper_family = taper_family_from_string(cfg.get_string("fsa.taper", "wendland1"));
  opts.num_inducing = cfg.get_int("fsa.m", 200);
  opts.taper_range = cfg.get_double("fsa.gamma", 0.0);
  opts.target_row_nnz = cfg.get_double("fsa.target_row_nnz", 40.0);
  opts.precond = precond_type_from_string(cfg.get_string("precond.type", "fitc"));
  opts.pivchol_rank = cfg.get_int("precond.rank", 50);
  opts.num_probes = cfg.get_int("slq.probes", 50);
  const std::string cv = cfg.get_string("slq.cv", "optimal");
  if (cv == "none") {
    opts.cv = CvMode::none;
  } else if (cv == "one") {
    opts.cv = CvMode::one;
  } else if (cv == "optimal") {
    opts.cv = CvMode::optimal;
  } else {
    throw std::invalid_argument("slq.cv must be none, one, or optimal");
  }
  opts.seed = cfg.get_u64("slq.seed", 0);
  opts.cg.tol = cfg.get_double("cg.tol", 1e-3);
  opts.cg.max_iter = cfg.get_int("cg.max_iter", 1000);
  opts.opt.max_evals = cfg.get_int("opt.max_evals", 200);
  opts.grad_tol_per_n = cfg.get_double("opt.grad_tol_per_n", 1e-3);

  Timer timer;
  const LocationSet locs(ds.coords);
  const FitResult fit = fit_fsa(locs, ds.y, ds.covariates, opts);
  const double wall_ms = timer.ms();

  json j;
  j["n"] = ds.n();
  j["dim"] = ds.dim();
  j["data"] = data_path;
  j["backend"] = backend;
  j["kernel"] = {{"family", "matern"}, {"nu", matern_nu_value(opts.kernel.nu)}};
  j["taper"] = {{"family", taper_family_to_string(opts.taper_family)}, {"gamma", fit.gamma}};
  j["m"] = fit.inducing.size();
  j["params"] = params_json(fit.params);
  j["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  j["covariates"] = ds.covariate_names;
  j["nll"] = fit.nll;
  j["evals"] = fit.evals;
  j["converged"] = fit.converged;
  j["nll_trace"] = fit.nll_trace;
  j["seed"] = cfg.get_u64("slq.seed", 0);
  std::vector<std::vector<double>> ind;
  for (Eigen::Index i = 0; i < fit.inducing.size(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(fit.inducing.dim()));
    for (Eigen::Index c = 0; c < fit.inducing.dim(); ++c)
      row[static_cast<std::size_t>(c)] = fit.inducing.coords(i, c);
    ind.push_back(std::move(row));
  }
  j["inducing"] = ind;
  j["wall_ms"] = wall_ms;

  const std::string out_path = cfg.get_string("out.path", "");
  if (!out_path.empty()) write_json_file(out_path, j);
  std::cout << "nll=" << format_double(fit.nll) << " sigma2=" << format_double(fit.params.sigma2)
            << " sigma1_2=" << format_double(fit.params.sigma1_2)
            << " rho=" << format_double(fit.params.rho) << " evals=" << fit.evals
            << " converged=" << (fit.converged ? "true" : "false") << '\n';
  return 0;
}

namespace {

// Model pieces for prediction, either read back from a fit result file or
// assembled from explicit config values.
struct PredictModel {
  CovParams params;
  vec_t beta;
  KernelSpec kernel;
  TaperSpec taper;
  LocationSet inducing;
};

PredictModel predict_model_from_config(const RunConfig& cfg, const LocationSet& train_locs) {
  PredictModel pm;
  if (cfg.has("model.fit")) {
    std::ifstream in(cfg.get_string("model.fit", ""));
    if (!in) {
      throw std::invalid_argument("cannot open fit file: " + cfg.get_string("model.fit", ""));
    }
    json j = json::parse(in);
    pm.params.sigma2 = j.at("params").at("sigma2").get<double>();
    pm.params.sigma1_2 = j.at("params").at("sigma1_2").get<double>();
    pm.params.rho = j.at("params").at("rho").get<double>();
    const auto beta = j.at("beta").get<std::vector<double>>();
    pm.beta = Eigen::Map<const vec_t>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    pm.kernel.nu = matern_nu_from_value(j.at("kernel").at("nu").get<double>());
    pm.taper.family = taper_family_from_string(j.at("taper").at("family").get<std::string>());
    pm.taper.gamma = j.at("taper").at("gamma").get<double>();
    const auto ind = j.at("inducing").get<std::vector<std::vector<double>>>();
    require(!ind.empty(), "fit file has no inducing points");
    den_mat_t coords(static_cast<Eigen::Index>(ind.size()),
                     static_cast<Eigen::Index>(ind.front().size()));
    for (std::size_t i = 0; i < ind.size(); ++i) {
      coords.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(
          ind[i].data(), static_cast<Eigen::Index>(ind[i].size()));
    }
    pm.inducing = LocationSet(std::move(coords));
  } else {
    pm.kernel.nu = nu_from_config(cfg);
    pm.params = params_from_config(cfg, pm.kernel.nu);
    if (cfg.has("model.beta")) {
      const std::vector<double> b = cfg.get_double_list("model.beta", {});
      pm.beta = Eigen::Map<const vec_t>(b.data(), static_cast<Eigen::Index>(b.size()));
    }
    pm.taper = taper_from_config(cfg, train_locs.size());
    pm.inducing =
        select_kmeanspp(train_locs, cfg.get_int("fsa.m", 200), cfg.get_u64("fsa.seed", 0));
  }
  pm.params.validate();
  return pm;
}

}  // namespace

int cmd_predict(const RunConfig& cfg) {
  cfg.require_known({"data.train", "data.test", "out.path", "out.scores", "model.fit",
                     "model.sigma2", "model.sigma1_2", "model.rho", "model.effective_range",
                     "model.beta", "kernel.nu", "fsa.m", "fsa.gamma", "fsa.target_row_nnz",
                     "fsa.taper", "fsa.seed", "predict.mean", "predict.var", "predict.probes",
                     "predict.rank", "predict.seed", "predict.cv", "cg.tol", "cg.max_iter"});
  const std::string train_path = cfg.get_string("data.train", "");
  const std::string test_path = cfg.get_string("data.test", "");
  require(!train_path.empty() && !test_path.empty(), "data.train and data.test are required");
  const Dataset train = read_dataset_csv(train_path);
  if (!train.has_y) {
    throw std::invalid_argument("data file " + train_path + " has no response column 'y'");
  }
  const Dataset test = read_dataset_csv(test_path);
  require(train.dim() == test.dim(), "train and test dimensions differ");

  const LocationSet train_locs(train.coords);
  const PredictModel pm = predict_model_from_config(cfg, train_locs);
  require(pm.beta.size() == train.covariates.cols(),
          "model.beta length must match the covariate count");

  Timer timer;
  FsaModel model =
      FsaModel::assemble(train_locs, pm.inducing, pm.kernel, pm.taper, pm.params);
  vec_t resid = train.y;
  if (pm.beta.size() > 0) resid -= train.covariates * pm.beta;

  PredictionSet pred = make_prediction_set(model, LocationSet(test.coords));

  CgOptions cg;
  cg.tol = cfg.get_double("cg.tol", 1e-3);
  cg.max_iter = cfg.get_int("cg.max_iter", 1000);

  const std::string mean_kind = cfg.get_string("predict.mean", "iterative");
  vec_t mean;
  if (mean_kind == "exact") {
    mean = predict_mean_exact(model, pred, resid);
  } else if (mean_kind == "iterative") {
    auto fitc = FitcPrecond::from_fsa(model, false);
    mean = predict_mean_iterative(model, pred, resid, *fitc, cg);
  } else {
    throw std::invalid_argument("predict.mean must be exact or iterative");
  }
  if (pm.beta.size() > 0) {
    require(test.covariates.cols() == train.covariates.cols(),
            "test covariates must match the training covariates");
    mean += test.covariates * pm.beta;
  }

  const std::string var_kind = cfg.get_string("predict.var", "sim");
  PredVarResult var;
  bool have_var = true;
  if (var_kind == "exact") {
    var = predict_var_exact(model, pred);
  } else if (var_kind == "sim") {
    SimVarOptions vopts;
    vopts.num_probes = cfg.get_int("predict.probes", 500);
    vopts.seed = cfg.get_u64("predict.seed", 0);
    vopts.cg = cg;
    vopts.cg_s = cg;
    vopts.control_variate = cfg.get_bool("predict.cv", false);
    var = predict_var_sim(model, pred, vopts);
  } else if (var_kind == "lanczos") {
    LanczosVarOptions vopts;
    vopts.rank = cfg.get_int("predict.rank", 50);
    vopts.cg = cg;
    vopts.cg_s = cg;
    var = predict_var_lanczos(model, pred, vopts);
  } else if (var_kind == "none") {
    have_var = false;
  } else {
    throw std::invalid_argument("predict.var must be exact, sim, lanczos, or none");
  }
  const double wall_ms = timer.ms();

  const std::string out_path = cfg.get_string("out.path", "");
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::invalid_argument("cannot write output file: " + out_path);
    for (Eigen::Index k = 0; k < test.dim(); ++k) out << 'x' << (k + 1) << ',';
    out << "mean";
    if (have_var) out << ",var";
    out << '\n';
    for (Eigen::Index i = 0; i < test.n(); ++i) {
      for (Eigen::Index k = 0; k < test.dim(); ++k) out << format_double(test.coords(i, k)) << ',';
      out << format_double(mean[i]);
      if (have_var) out << ',' << format_double(var.var[i]);
      out << '\n';
    }
  }

  json j;
  j["n_train"] = train.n();
  j["n_test"] = test.n();
  j["mean_backend"] = mean_kind;
  j["var_method"] = var_kind;
  j["wall_ms"] = wall_ms;
  if (have_var) j["cg_iterations"] = var.cg_iterations;
  if (test.has_y && have_var) {
    const Scores s = score_predictions(test.y, mean, var.var);
    j["scores"] = {{"rmse", s.rmse}, {"log_score", s.log_score}, {"crps", s.crps}};
  } else if (test.has_y) {
    const double rmse = std::sqrt((test.y - mean).squaredNorm() / static_cast<double>(test.n()));
    j["scores"] = {{"rmse", rmse}};
  }
  const std::string scores_path = cfg.get_string("out.scores", "");
  if (!scores_path.empty()) write_json_file(scores_path, j);
  json jprint = j;
  jprint.erase("wall_ms");
  std::cout << jprint.dump() << '\n';
  return 0;
}

int cmd_bench_precond(const RunConfig& cfg) {
  cfg.require_known({"data.path", "data.n", "data.dim", "data.seed", "kernel.nu", "model.sigma2",
                     "model.sigma1_2", "model.rho", "model.effective_range", "fsa.m", "fsa.gamma",
                     "fsa.target_row_nnz", "fsa.taper", "fsa.seed", "bench.preconds",
                     "bench.rank", "cg.tol", "cg.max_iter", "out.path"});
  const MaternNu nu = nu_from_config(cfg);
  const Dataset ds = load_or_simulate(cfg, nu);
  const LocationSet locs(ds.coords);
  CovParams params = params_from_config(cfg, nu);
  params.validate();
  TaperSpec taper = taper_from_config(cfg, locs.size());
  LocationSet inducing =
      select_kmeanspp(locs, cfg.get_int("fsa.m", 200), cfg.get_u64("fsa.seed", 0));

  FsaModel model = FsaModel::assemble(locs, inducing, KernelSpec{nu}, taper, params);
  const LinOp A = fsa_operator(model);

  CgOptions cg;
  cg.tol = cfg.get_double("cg.tol", 1e-3);
  cg.max_iter = cfg.get_int("cg.max_iter", 1000);

  std::vector<std::string> names;
  {
    std::stringstream ss(cfg.get_string("bench.preconds", "none,diagonal,fitc,pivchol"));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) names.push_back(tok);
    }
  }

  std::vector<std::vector<std::string>> rows;
  for (const auto& name : names) {
    auto P = build_precond(model, name, cfg.get_int("bench.rank", 50));
    Timer timer;
    const CgResult r = pcg_solve(A, *P, ds.y, cg);
    rows.push_back({name, std::to_string(r.iterations), r.converged ? "true" : "false",
                    format_double(r.residual_norm), format_double(timer.ms())});
  }

  const std::vector<std::string> header = {"preconditioner", "iterations", "converged",
                                           "residual", "wall_ms"};
  std::cout << "n=" << locs.size() << " m=" << inducing.size()
            << " gamma=" << format_double(taper.gamma)
            << " avg_row_nnz=" << format_double(avg_row_nnz(model.dists)) << '\n';
  print_markdown_table(header, rows);
  const std::string out_path = cfg.get_string("out.path", "");
  if (!out_path.empty()) write_csv_table(out_path, header, rows);
  return 0;
}

int cmd_sweep_fsa(const RunConfig& cfg) {
  cfg.require_known({"data.path", "data.n", "data.dim", "data.seed", "kernel.nu", "model.sigma2",
                     "model.sigma1_2", "model.rho", "model.effective_range", "fsa.taper",
                     "fsa.seed", "sweep.m_list", "sweep.nnz_list", "out.path"});
  const MaternNu nu = nu_from_config(cfg);
  const Dataset ds = load_or_simulate(cfg, nu);
  if (!ds.has_y) throw std::invalid_argument("sweep data has no response column 'y'");
  const LocationSet locs(ds.coords);
  CovParams params = params_from_config(cfg, nu);
  params.validate();
  const TaperFamily family = taper_family_from_string(cfg.get_string("fsa.taper", "wendland1"));

  const std::vector<double> m_list = cfg.get_double_list("sweep.m_list", {50, 100, 200});
  const std::vector<double> nnz_list = cfg.get_double_list("sweep.nnz_list", {10, 20, 40});

  const den_mat_t X(locs.size(), 0);
  const vec_t beta;
  std::vector<std::vector<std::string>> rows;
  for (double md : m_list) {
    const auto m = static_cast<Eigen::Index>(md);
    LocationSet inducing = select_kmeanspp(locs, m, cfg.get_u64("fsa.seed", 0));
    for (double nnz : nnz_list) {
      TaperSpec taper;
      taper.family = family;
      taper.gamma = gamma_for_avg_row_nnz(locs.size(), nnz);
      Timer timer;
      FsaModel model = FsaModel::assemble(locs, inducing, KernelSpec{nu}, taper, params);
      const double nll = model.nll(ds.y, X, beta);
      rows.push_back({std::to_string(m), format_double(nnz), format_double(taper.gamma),
                      format_double(avg_row_nnz(model.dists)), format_double(nll),
                      format_double(timer.ms())});
    }
  }

  const std::vector<std::string> header = {"m",           "target_row_nnz", "gamma",
                                           "avg_row_nnz", "nll",            "wall_ms"};
  print_markdown_table(header, rows);
  const std::string out_path = cfg.get_string("out.path", "");
  if (!out_path.empty()) write_csv_table(out_path, header, rows);
  return 0;
}

int cmd_vecchia_bench(const RunConfig& cfg) {
  cfg.require_known({"data.path", "data.n", "data.dim", "data.seed", "kernel.nu", "model.sigma2",
                     "model.sigma1_2", "model.rho", "model.effective_range", "vecchia.m",
                     "vecchia.seed", "precond.m", "precond.seed", "bench.probes_list",
                     "bench.preconds", "bench.reps", "bench.seed", "cg.tol", "cg.max_iter",
                     "out.path"});
  const MaternNu nu = nu_from_config(cfg);
  const Dataset ds = load_or_simulate(cfg, nu);
  const LocationSet locs(ds.coords);
  const auto n = locs.size();
  require(n <= 4000, "vecchia-bench needs the dense reference, n must be at most 4000");
  CovParams params = params_from_config(cfg, nu);
  params.validate();
  const KernelSpec kern{nu};

  VecchiaOptions vopts;
  vopts.num_neighbors = cfg.get_int("vecchia.m", 30);
  vopts.seed = cfg.get_u64("vecchia.seed", 0);
  const VecchiaFactor fac = build_vecchia(locs, kern, params, vopts);

  const vec_t w_inv = vec_t::Constant(n, params.sigma2);
  const vec_t w = vec_t::Constant(n, 1.0 / params.sigma2);

  // Dense reference for log det(Sigma_V + sigma2 I).
  den_mat_t dense = fac.cov_matmat(den_mat_t::Identity(n, n));
  dense.diagonal().array() += params.sigma2;
  const Eigen::LLT<den_mat_t> llt(dense);
  require(llt.info() == Eigen::Success, "dense reference factorization failed");
  const double logdet_ref =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();

  std::vector<std::string> names;
  {
    std::stringstream ss(cfg.get_string("bench.preconds", "fitc,obs_vecchia"));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) names.push_back(tok);
    }
  }
  const std::vector<double> probes_list = cfg.get_double_list("bench.probes_list", {5, 20, 50});
  const int reps = cfg.get_int("bench.reps", 10);
  const std::uint64_t bench_seed = cfg.get_u64("bench.seed", 0);

  CgOptions cg;
  cg.tol = cfg.get_double("cg.tol", 1e-3);
  cg.max_iter = cfg.get_int("cg.max_iter", 1000);

  std::vector<std::vector<std::string>> rows;
  for (const auto& name : names) {
    std::unique_ptr<Preconditioner> P;
    if (name == "fitc") {
      LocationSet inducing =
          select_kmeanspp(locs, cfg.get_int("precond.m", 200), cfg.get_u64("precond.seed", 0));
      P = fitc_for_vecchia(locs, inducing, kern, params, w_inv);
    } else if (name == "obs_vecchia") {
      VecchiaOptions oopts = vopts;
      oopts.seed = cfg.get_u64("precond.seed", 0);
      P = std::make_unique<ObsVecchiaPrecond>(build_vecchia(locs, kern, params, oopts, w_inv));
    } else if (name == "none") {
      P = std::make_unique<IdentityPrecond>(n);
    } else {
      throw std::invalid_argument("bench.preconds entries must be fitc, obs_vecchia, or none");
    }
    for (double pl : probes_list) {
      VecchiaSlqOptions sopts;
      sopts.num_probes = static_cast<int>(pl);
      sopts.cg = cg;
      Timer timer;
      double sq_err = 0.0;
      for (int rep = 0; rep < reps; ++rep) {
        sopts.seed = splitmix64(bench_seed + static_cast<std::uint64_t>(rep));
        const double est = vecchia_cov_logdet_slq(fac, w_inv, *P, sopts);
        sq_err += (est - logdet_ref) * (est - logdet_ref);
      }
      const double rmse = std::sqrt(sq_err / reps);
      rows.push_back({name, std::to_string(static_cast<int>(pl)), std::to_string(reps),
                      format_double(rmse), format_double(timer.ms())});
    }
  }

  const std::vector<std::string> header = {"preconditioner", "probes", "reps", "logdet_rmse",
                                           "wall_ms"};
  std::cout << "n=" << n << " vecchia_m=" << vopts.num_neighbors
            << " logdet_ref=" << format_double(logdet_ref) << '\n';
  print_markdown_table(header, rows);
  const std::string out_path = cfg.get_string("out.path", "");
  if (!out_path.empty()) write_csv_table(out_path, header, rows);
  (void)w;
  return 0;
}

}  // namespace fsagp::cli
