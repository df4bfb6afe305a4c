#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "linf_mwu/mwu.hpp"

namespace linf_mwu {

struct BenchConfig {
  std::vector<int> ns = {32, 64, 128, 256};
  int seeds = 10;
  std::uint64_t seed0 = 1;
  int d_dim = 3;
  std::string distribution = "gaussian";
  std::vector<Algo> algos = {Algo::monotone, Algo::baseline};
  Backend backend = Backend::direct;
  SolverParams params;
  // Iterations are counted until the running average reaches residual 1 + target_factor * eps
  // on the instance normalized by its exact optimum.
  double target_factor = 1.0;
  int threads = 1;
};

struct BenchCell {
  int n = 0;
  std::uint64_t seed = 0;
  Algo algo = Algo::monotone;
  long primal = 0;
  long width = 0;
  std::string status;
  double residual = 0;
  double opt = 0;
  OpCounts op_counts;
  StabilityReport stability;
  double seconds = 0;
  std::string error;

  long iterations() const { return primal + width; }
};

struct BenchSlope {
  Algo algo;
  double slope = 0;
  double intercept = 0;
  int points = 0;
};

struct BenchResult {
  std::vector<BenchCell> cells;
  std::vector<BenchSlope> slopes;
};

// Least-squares slope of ln y on ln x.
BenchSlope fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys);

BenchResult run_bench(const BenchConfig& cfg);

inline constexpr const char* kBenchHeader =
    "n,seed,algo,iterations,primal,width,status,residual,opt,resets,partial_resets,queries,l3_primal_mass,"
    "max_l2_step,seconds,error";

void write_bench_csv(std::ostream& out, const BenchResult& res);

}  // namespace linf_mwu
