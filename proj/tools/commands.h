#pragma once

#include "fsagp/io.h"

namespace fsagp::cli {

int cmd_simulate(const RunConfig& cfg);
int cmd_fit(const RunConfig& cfg);
int cmd_predict(const RunConfig& cfg);
int cmd_bench_precond(const RunConfig& cfg);
int cmd_sweep_fsa(const RunConfig& cfg);
int cmd_vecchia_bench(const RunConfig& cfg);

}  // namespace fsagp::cli
