#include "linf_mwu/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ostream>
#include <thread>

#include "linf_mwu/chebyshev.hpp"
#include "linf_mwu/error.hpp"
#include "linf_mwu/potentials.hpp"

namespace linf_mwu {

BenchSlope fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw Error(ErrorCode::invalid_parameter, "need two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  BenchSlope s;
  s.points = static_cast<int>(xs.size());
  const double den = k * sxx - sx * sx;
  if (den == 0) throw Error(ErrorCode::invalid_parameter, "all x values coincide");
  s.slope = (k * sxy - sx * sy) / den;
  s.intercept = (sy - s.slope * sx) / k;
  return s;
}

namespace {

BenchCell run_cell(const BenchConfig& cfg, int n, std::uint64_t seed, Algo algo) {
  BenchCell cell;
  cell.n = n;
  cell.seed = seed;
  cell.algo = algo;
  auto t0 = std::chrono::steady_clock::now();
  try {
    Instance raw = generate(seed, n, cfg.d_dim, parse_distribution(cfg.distribution));
    ChebyshevResult ref = bruteforce_opt(raw);
    cell.opt = ref.opt;
    Instance inst = normalize(raw, ref.opt);
    SolverParams p = cfg.params;
    p.record_trace = false;
    p.stop_residual = 1 + cfg.target_factor * p.epsilon;
    SolverRun run = solve_with(inst, p, algo, cfg.backend);
    cell.primal = run.primal_steps;
    cell.width = run.width_steps;
    cell.status = to_string(run.status);
    cell.residual = run.residual;
    cell.op_counts = run.op_counts;
    cell.stability = run.stability;
  } catch (const std::exception& e) {
    cell.status = "error";
    cell.error = e.what();
  }
  cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cell;
}

}  // namespace

BenchResult run_bench(const BenchConfig& cfg) {
  struct Job {
    int n;
    std::uint64_t seed;
    Algo algo;
  };
  std::vector<Job> jobs;
  for (int n : cfg.ns)
    for (int s = 0; s < cfg.seeds; ++s)
      for (Algo a : cfg.algos) jobs.push_back({n, cfg.seed0 + static_cast<std::uint64_t>(s), a});
  BenchResult res;
  res.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t j = next++; j < jobs.size(); j = next++)
      res.cells[j] = run_cell(cfg, jobs[j].n, jobs[j].seed, jobs[j].algo);
  };
  const int threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (Algo a : cfg.algos) {
    std::vector<double> xs, ys;
    for (int n : cfg.ns) {
      double sum = 0;
      int cnt = 0;
      for (const auto& c : res.cells)
        // one iteration means the starting point already met the target
        if (c.algo == a && c.n == n && c.error.empty() && c.iterations() > 1) {
          sum += std::log(static_cast<double>(std::max(1L, c.iterations())));
          ++cnt;
        }
      if (cnt > 0) {
        xs.push_back(n);
        ys.push_back(std::exp(sum / cnt));
      }
    }
    if (xs.size() >= 2) {
      BenchSlope s = fit_loglog(xs, ys);
      s.algo = a;
      res.slopes.push_back(s);
    }
  }
  return res;
}

void write_bench_csv(std::ostream& out, const BenchResult& res) {
  out << kBenchHeader << '\n';
  for (const auto& c : res.cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    out << c.n << ',' << c.seed << ',' << to_string(c.algo) << ',' << c.iterations() << ',' << c.primal << ','
        << c.width << ',' << c.status << ',' << format_double(c.residual) << ',' << format_double(c.opt) << ','
        << c.op_counts.resets << ',' << c.op_counts.partial_resets << ',' << c.op_counts.queries << ','
        << format_double(c.stability.l3_primal_mass) << ',' << format_double(c.stability.max_l2_step) << ','
        << format_double(c.seconds) << ',' << err << '\n';
  }
}

}  // namespace linf_mwu
