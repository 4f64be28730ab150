#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.h"
#include "fsagp/types.h"

namespace {

using fsagp::RunConfig;

struct SubSpec {
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flag_values;  // config key -> value
  std::function<int(const RunConfig&)> run;
};

void add_key_option(SubSpec& spec, const std::string& flag, const std::string& key,
                    const std::string& desc) {
  spec.app->add_option_function<std::string>(
      flag, [&spec, key](const std::string& v) { spec.flag_values.emplace_back(key, v); }, desc);
}

RunConfig merge_config(const SubSpec& spec) {
  RunConfig cfg;
  if (!spec.config_path.empty()) cfg = RunConfig::from_file(spec.config_path);
  for (const auto& kv : spec.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [key, value] : spec.flag_values) cfg.set(key, value);
  return cfg;
}

void setup_common(SubSpec& spec) {
  spec.app->add_option("--config", spec.config_path, "key/value config file");
  spec.app
      ->add_option("--set", spec.sets, "override a config entry as section.key=value")
      ->take_all();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian process regression for large spatial datasets"};
  app.set_version_flag("--version", "0.1.0");
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: all cores)");

  std::vector<std::unique_ptr<SubSpec>> specs;
  auto make_sub = [&](const std::string& name, const std::string& desc,
                      std::function<int(const RunConfig&)> run) -> SubSpec& {
    auto spec = std::make_unique<SubSpec>();
    spec->app = app.add_subcommand(name, desc);
    spec->run = std::move(run);
    setup_common(*spec);
    specs.push_back(std::move(spec));
    return *specs.back();
  };

  {
    SubSpec& s = make_sub("simulate", "draw spatial data from the model and write a CSV",
                          fsagp::cli::cmd_simulate);
    add_key_option(s, "--n", "data.n", "number of locations");
    add_key_option(s, "--dim", "data.dim", "coordinate dimension");
    add_key_option(s, "--seed", "data.seed", "random seed");
    add_key_option(s, "--out", "data.out", "output CSV path");
    add_key_option(s, "--nu", "kernel.nu", "Matern smoothness (0.5, 1.5, 2.5)");
    add_key_option(s, "--sigma2", "model.sigma2", "nugget variance");
    add_key_option(s, "--sigma1sq", "model.sigma1_2", "signal variance");
    add_key_option(s, "--rho", "model.rho", "range parameter");
    add_key_option(s, "--effective-range", "model.effective_range",
                   "distance where the correlation drops to 0.05");
    add_key_option(s, "--beta", "model.beta", "regression coefficients (intercept + coords)");
    add_key_option(s, "--method", "sim.method", "exact or fsa");
    add_key_option(s, "--m", "fsa.m", "inducing points for the fsa method");
    add_key_option(s, "--target-row-nnz", "fsa.target_row_nnz", "taper density target");
    add_key_option(s, "--gamma", "fsa.gamma", "taper range");
    add_key_option(s, "--taper", "fsa.taper", "taper family");
  }
  {
    SubSpec& s = make_sub("fit", "estimate covariance parameters from a CSV dataset",
                          fsagp::cli::cmd_fit);
    add_key_option(s, "--data", "data.path", "input CSV path");
    add_key_option(s, "--out", "out.path", "fit result JSON path");
    add_key_option(s, "--backend", "fit.backend", "cholesky or iterative");
    add_key_option(s, "--nu", "kernel.nu", "Matern smoothness");
    add_key_option(s, "--m", "fsa.m", "number of inducing points");
    add_key_option(s, "--gamma", "fsa.gamma", "taper range (overrides the density target)");
    add_key_option(s, "--target-row-nnz", "fsa.target_row_nnz", "taper density target");
    add_key_option(s, "--taper", "fsa.taper", "taper family");
    add_key_option(s, "--precond", "precond.type", "none, diagonal, fitc, or pivchol");
    add_key_option(s, "--rank", "precond.rank", "pivoted Cholesky rank");
    add_key_option(s, "--probes", "slq.probes", "probe vectors per likelihood evaluation");
    add_key_option(s, "--cv", "slq.cv", "trace control variate: none, one, optimal");
    add_key_option(s, "--seed", "slq.seed", "probe and inducing-point seed");
    add_key_option(s, "--cg-tol", "cg.tol", "CG residual tolerance");
    add_key_option(s, "--cg-max-iter", "cg.max_iter", "CG iteration cap");
    add_key_option(s, "--max-evals", "opt.max_evals", "optimizer evaluation cap");
  }
  {
    SubSpec& s = make_sub("predict", "predictive means and variances at new locations",
                          fsagp::cli::cmd_predict);
    add_key_option(s, "--train", "data.train", "training CSV path");
    add_key_option(s, "--test", "data.test", "prediction CSV path");
    add_key_option(s, "--out", "out.path", "predictions CSV path");
    add_key_option(s, "--scores", "out.scores", "scores JSON path");
    add_key_option(s, "--fit", "model.fit", "fit result JSON with parameters");
    add_key_option(s, "--nu", "kernel.nu", "Matern smoothness");
    add_key_option(s, "--m", "fsa.m", "number of inducing points");
    add_key_option(s, "--mean", "predict.mean", "exact or iterative");
    add_key_option(s, "--var", "predict.var", "exact, sim, lanczos, or none");
    add_key_option(s, "--probes", "predict.probes", "simulation probe count");
    add_key_option(s, "--rank", "predict.rank", "Lanczos rank");
    add_key_option(s, "--seed", "predict.seed", "probe seed");
    add_key_option(s, "--cg-tol", "cg.tol", "CG residual tolerance");
    add_key_option(s, "--cg-max-iter", "cg.max_iter", "CG iteration cap");
  }
  {
    SubSpec& s = make_sub("bench-precond", "CG iteration counts per preconditioner",
                          fsagp::cli::cmd_bench_precond);
    add_key_option(s, "--data", "data.path", "input CSV path (otherwise simulated)");
    add_key_option(s, "--n", "data.n", "locations when simulating");
    add_key_option(s, "--seed", "data.seed", "simulation seed");
    add_key_option(s, "--nu", "kernel.nu", "Matern smoothness");
    add_key_option(s, "--rho", "model.rho", "range parameter");
    add_key_option(s, "--effective-range", "model.effective_range", "correlation 0.05 distance");
    add_key_option(s, "--m", "fsa.m", "number of inducing points");
    add_key_option(s, "--gamma", "fsa.gamma", "taper range");
    add_key_option(s, "--target-row-nnz", "fsa.target_row_nnz", "taper density target");
    add_key_option(s, "--preconds", "bench.preconds", "comma list of preconditioners");
    add_key_option(s, "--rank", "bench.rank", "pivoted Cholesky rank");
    add_key_option(s, "--cg-tol", "cg.tol", "CG residual tolerance");
    add_key_option(s, "--cg-max-iter", "cg.max_iter", "CG iteration cap");
    add_key_option(s, "--out", "out.path", "CSV output path");
  }
  {
    SubSpec& s = make_sub("sweep-fsa", "exact likelihood over a grid of approximation sizes",
                          fsagp::cli::cmd_sweep_fsa);
    add_key_option(s, "--data", "data.path", "input CSV path (otherwise simulated)");
    add_key_option(s, "--n", "data.n", "locations when simulating");
    add_key_option(s, "--seed", "data.seed", "simulation seed");
    add_key_option(s, "--nu", "kernel.nu", "Matern smoothness");
    add_key_option(s, "--rho", "model.rho", "range parameter");
    add_key_option(s, "--effective-range", "model.effective_range", "correlation 0.05 distance");
    add_key_option(s, "--m-list", "sweep.m_list", "comma list of inducing point counts");
    add_key_option(s, "--nnz-list", "sweep.nnz_list", "comma list of taper density targets");
    add_key_option(s, "--out", "out.path", "CSV output path");
  }
  {
    SubSpec& s = make_sub("vecchia-bench",
                          "log-determinant accuracy of the conditioning approximation",
                          fsagp::cli::cmd_vecchia_bench);
    add_key_option(s, "--data", "data.path", "input CSV path (otherwise simulated)");
    add_key_option(s, "--n", "data.n", "locations when simulating");
    add_key_option(s, "--seed", "data.seed", "simulation seed");
    add_key_option(s, "--nu", "kernel.nu", "Matern smoothness");
    add_key_option(s, "--rho", "model.rho", "range parameter");
    add_key_option(s, "--sigma2", "model.sigma2", "nugget variance");
    add_key_option(s, "--sigma1sq", "model.sigma1_2", "signal variance");
    add_key_option(s, "--m", "vecchia.m", "conditioning set size");
    add_key_option(s, "--precond-m", "precond.m", "inducing points for the low-rank precond");
    add_key_option(s, "--probes-list", "bench.probes_list", "comma list of probe counts");
    add_key_option(s, "--preconds", "bench.preconds", "comma list: fitc, obs_vecchia, none");
    add_key_option(s, "--reps", "bench.reps", "repetitions per cell");
    add_key_option(s, "--bench-seed", "bench.seed", "probe seed base");
    add_key_option(s, "--cg-tol", "cg.tol", "CG residual tolerance");
    add_key_option(s, "--cg-max-iter", "cg.max_iter", "CG iteration cap");
    add_key_option(s, "--out", "out.path", "CSV output path");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (threads <= 0) {
    if (const char* env = std::getenv("FSAGP_NUM_THREADS")) {
      threads = std::atoi(env);
    }
  }
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads > 0) Eigen::setNbThreads(threads);

  for (const auto& spec : specs) {
    if (!spec->app->parsed()) continue;
    try {
      const RunConfig cfg = merge_config(*spec);
      return spec->run(cfg);
    } catch (const fsagp::NumericalError& e) {
      std::cerr << "numerical failure: " << e.what() << '\n';
      return 3;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    } catch (const std::invalid_argument& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 3;
    }
  }
  return 0;
}
