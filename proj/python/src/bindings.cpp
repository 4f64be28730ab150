#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fsagp/estimation.h"
#include "fsagp/fsa.h"
#include "fsagp/inducing.h"
#include "fsagp/kernels.h"
#include "fsagp/prediction.h"
#include "fsagp/preconditioners.h"
#include "fsagp/vecchia.h"

namespace py = pybind11;
using namespace fsagp;

namespace {

CovParams make_params(double sigma2, double sigma1_2, double rho) {
  CovParams p;
  p.sigma2 = sigma2;
  p.sigma1_2 = sigma1_2;
  p.rho = rho;
  p.validate();
  return p;
}

FsaModel make_model(const den_mat_t& coords, const den_mat_t& inducing, double nu,
                    const std::string& taper_family, double gamma, double sigma2,
                    double sigma1_2, double rho) {
  KernelSpec kern{matern_nu_from_value(nu)};
  TaperSpec taper;
  taper.family = taper_family_from_string(taper_family);
  taper.gamma = gamma;
  return FsaModel::assemble(LocationSet(coords), LocationSet(inducing), kern, taper,
                            make_params(sigma2, sigma1_2, rho));
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Gaussian process regression for large spatial datasets";

  mod.def(
      "matern",
      [](double d, double nu, double sigma1_2, double rho) {
        return matern(d, matern_nu_from_value(nu), sigma1_2, rho);
      },
      py::arg("d"), py::arg("nu"), py::arg("sigma1_2"), py::arg("rho"));

  mod.def(
      "simulate",
      [](const den_mat_t& coords, double nu, double sigma2, double sigma1_2, double rho,
         std::uint64_t seed) {
        LocationSet locs(coords);
        const den_mat_t X(locs.size(), 0);
        return simulate_gp(locs, KernelSpec{matern_nu_from_value(nu)},
                           make_params(sigma2, sigma1_2, rho), X, seed)
            .y;
      },
      py::arg("coords"), py::arg("nu"), py::arg("sigma2"), py::arg("sigma1_2"), py::arg("rho"),
      py::arg("seed") = 1);

  mod.def(
      "select_inducing",
      [](const den_mat_t& coords, Eigen::Index m, std::uint64_t seed, const std::string& method) {
        LocationSet locs(coords);
        if (method == "kmeanspp") return select_kmeanspp(locs, m, seed).coords;
        if (method == "random") return select_random(locs, m, seed).coords;
        throw std::invalid_argument("method must be kmeanspp or random");
      },
      py::arg("coords"), py::arg("m"), py::arg("seed") = 0, py::arg("method") = "kmeanspp");

  mod.def(
      "taper_range_for_row_nnz",
      [](Eigen::Index n, double target) { return gamma_for_avg_row_nnz(n, target); },
      py::arg("n"), py::arg("target_row_nnz"));

  py::class_<FsaModel>(mod, "Model")
      .def(py::init(&make_model), py::arg("coords"), py::arg("inducing"), py::arg("nu") = 1.5,
           py::arg("taper_family") = "wendland1", py::arg("gamma") = 0.1,
           py::arg("sigma2") = 1.0, py::arg("sigma1_2") = 1.0, py::arg("rho") = 0.1)
      .def_property_readonly("n", &FsaModel::n)
      .def_property_readonly("m", &FsaModel::m)
      .def("matvec", &FsaModel::matvec, py::arg("v"))
      .def("solve", &FsaModel::solve, py::arg("b"))
      .def("logdet", &FsaModel::logdet)
      .def(
          "nll",
          [](FsaModel& model, const vec_t& y) {
            const den_mat_t X(model.n(), 0);
            return model.nll(y, X, vec_t());
          },
          py::arg("y"))
      .def(
          "nll_grad",
          [](FsaModel& model, const vec_t& y) {
            const den_mat_t X(model.n(), 0);
            return model.nll_grad(y, X, vec_t());
          },
          py::arg("y"))
      .def(
          "nll_iterative",
          [](FsaModel& model, const vec_t& y, int probes, std::uint64_t seed,
             const std::string& precond, double cg_tol, int cg_max_iter) {
            auto P = make_preconditioner(model, precond_type_from_string(precond));
            IterativeNllOptions opts;
            opts.num_probes = probes;
            opts.seed = seed;
            opts.cg.tol = cg_tol;
            opts.cg.max_iter = cg_max_iter;
            const den_mat_t X(model.n(), 0);
            const IterativeNll r = iterative_nll_grad(model, *P, y, X, opts, false);
            return py::make_tuple(r.nll, r.cg_iterations);
          },
          py::arg("y"), py::arg("probes") = 50, py::arg("seed") = 0,
          py::arg("precond") = "fitc", py::arg("cg_tol") = 1e-3, py::arg("cg_max_iter") = 1000)
      .def(
          "predict",
          [](FsaModel& model, const den_mat_t& pred_coords, const vec_t& resid,
             const std::string& var_method, int probes, int rank, std::uint64_t seed) {
            PredictionSet pred = make_prediction_set(model, LocationSet(pred_coords));
            const vec_t mean = predict_mean_exact(model, pred, resid);
            vec_t var;
            if (var_method == "exact") {
              var = predict_var_exact(model, pred).var;
            } else if (var_method == "sim") {
              SimVarOptions opts;
              opts.num_probes = probes;
              opts.seed = seed;
              var = predict_var_sim(model, pred, opts).var;
            } else if (var_method == "lanczos") {
              LanczosVarOptions opts;
              opts.rank = rank;
              var = predict_var_lanczos(model, pred, opts).var;
            } else if (var_method != "none") {
              throw std::invalid_argument("var_method must be exact, sim, lanczos, or none");
            }
            return py::make_tuple(mean, var);
          },
          py::arg("pred_coords"), py::arg("resid"), py::arg("var_method") = "exact",
          py::arg("probes") = 500, py::arg("rank") = 50, py::arg("seed") = 0);

  mod.def(
      "fit",
      [](const den_mat_t& coords, const vec_t& y, const den_mat_t& X,
         const std::string& backend, int m, double target_row_nnz, double gamma, double nu,
         const std::string& precond, int probes, std::uint64_t seed, int max_evals) {
        FitOptions opts;
        opts.backend = backend == "cholesky" ? FitBackend::exact : FitBackend::iterative;
        opts.kernel.nu = matern_nu_from_value(nu);
        opts.num_inducing = m;
        opts.target_row_nnz = target_row_nnz;
        opts.taper_range = gamma;
        opts.precond = precond_type_from_string(precond);
        opts.num_probes = probes;
        opts.seed = seed;
        opts.opt.max_evals = max_evals;
        const FitResult fit = fit_fsa(LocationSet(coords), y, X, opts);
        py::dict out;
        out["sigma2"] = fit.params.sigma2;
        out["sigma1_2"] = fit.params.sigma1_2;
        out["rho"] = fit.params.rho;
        out["beta"] = fit.beta;
        out["nll"] = fit.nll;
        out["evals"] = fit.evals;
        out["converged"] = fit.converged;
        out["gamma"] = fit.gamma;
        out["inducing"] = fit.inducing.coords;
        return out;
      },
      py::arg("coords"), py::arg("y"), py::arg("X"), py::arg("backend") = "iterative",
      py::arg("m") = 200, py::arg("target_row_nnz") = 40.0, py::arg("gamma") = 0.0,
      py::arg("nu") = 1.5, py::arg("precond") = "fitc", py::arg("probes") = 50,
      py::arg("seed") = 0, py::arg("max_evals") = 200);

  mod.def(
      "vecchia_nll",
      [](const den_mat_t& coords, const vec_t& resid, double nu, double sigma2, double sigma1_2,
         double rho, int num_neighbors, std::uint64_t seed) {
        const KernelSpec kern{matern_nu_from_value(nu)};
        const CovParams params = make_params(sigma2, sigma1_2, rho);
        const LocationSet locs(coords);
        VecchiaOptions opts;
        opts.num_neighbors = num_neighbors;
        opts.seed = seed;
        const vec_t w_inv = vec_t::Constant(locs.size(), sigma2);
        VecchiaFactor fac = build_vecchia(locs, kern, params, opts, w_inv);
        return vecchia_nll_observable(fac, resid);
      },
      py::arg("coords"), py::arg("resid"), py::arg("nu") = 1.5, py::arg("sigma2") = 1.0,
      py::arg("sigma1_2") = 1.0, py::arg("rho") = 0.1, py::arg("num_neighbors") = 30,
      py::arg("seed") = 0);

  mod.def(
      "scores",
      [](const vec_t& y, const vec_t& mean, const vec_t& var) {
        const Scores s = score_predictions(y, mean, var);
        py::dict out;
        out["rmse"] = s.rmse;
        out["log_score"] = s.log_score;
        out["crps"] = s.crps;
        return out;
      },
      py::arg("y"), py::arg("mean"), py::arg("var"));

  py::register_exception<NumericalError>(mod, "NumericalError");
}
