#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "linf_mwu/bench.hpp"
#include "linf_mwu/chebyshev.hpp"
#include "linf_mwu/error.hpp"
#include "linf_mwu/mwu.hpp"
#include "linf_mwu/report.hpp"
#include "linf_mwu/verify.hpp"

using namespace linf_mwu;

namespace {

#ifndef LINF_MWU_EXAMPLE
#define LINF_MWU_EXAMPLE "tools/example_instance.json"
#endif

struct Options {
  std::string algo = "monotone";
  std::string backend = "direct";
  double eps = 0.1;
  std::uint64_t seed = 0;
  std::string input;
  std::string output;
  std::string trace;
  std::optional<double> a0, a1, eta, alpha, tau, rho, b, delta, T;
  std::optional<long> max_iters;
  bool exact_l3 = true;
  bool jl_psi = false;
  bool refresh_hh = false;
  bool fault_inject = false;
  bool normalized = false;
  std::string lazy = "dyadic";

  // gen
  int n = 40;
  int d = 3;
  std::string dist = "gaussian";
  double condition = 1e6;

  // bench
  std::vector<int> ns = {32, 64, 128, 256};
  int seeds = 10;
  std::vector<std::string> algos = {"monotone", "baseline-unaccelerated"};
  double target = 1.0;
};

void add_solver_flags(CLI::App* app, Options& o) {
  app->add_option("--algo", o.algo, "monotone | stable | robust | opt | baseline-unaccelerated");
  app->add_option("--backend", o.backend, "direct | one-level | two-level");
  app->add_option("--eps", o.eps, "accuracy in (0, 0.5)");
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--a0", o.a0, "full-reset exponent");
  app->add_option("--a1", o.a1, "partial-reset exponent");
  app->add_option("--eta", o.eta);
  app->add_option("--alpha", o.alpha);
  app->add_option("--tau", o.tau);
  app->add_option("--rho", o.rho);
  app->add_option("--b", o.b, "sketch rows");
  app->add_option("--delta", o.delta);
  app->add_option("--T", o.T, "primal iteration budget");
  app->add_option("--max-iters", o.max_iters);
  app->add_option("--exact-l3", o.exact_l3, "exact cubic mass (true) or sketched estimate (false)");
  app->add_flag("--jl-psi", o.jl_psi, "estimate the energy with a norm sketch");
  app->add_flag("--refresh-hh", o.refresh_hh, "fresh heavy-hitter sketch every width step");
  app->add_flag("--fault-inject", o.fault_inject, "corrupt inverse-maintenance resets");
  app->add_option("--lazy", o.lazy, "dyadic | cubic");
}

SolverParams to_params(const Options& o) {
  SolverParams p;
  p.epsilon = o.eps;
  p.seed = o.seed;
  if (o.a0) p.a0 = *o.a0;
  if (o.a1) p.a1 = *o.a1;
  p.eta = o.eta;
  p.alpha = o.alpha;
  p.tau = o.tau;
  p.rho = o.rho;
  p.b = o.b;
  p.delta = o.delta;
  p.T = o.T;
  p.max_iters = o.max_iters;
  p.exact_l3 = o.exact_l3;
  p.jl_psi = o.jl_psi;
  p.refresh_hh = o.refresh_hh;
  p.fault_inject = o.fault_inject;
  p.lazy = parse_lazy_scheme(o.lazy);
  return p;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  out << text << "\n";
}

int threads_from_env() {
  if (const char* s = std::getenv("LINF_MWU_THREADS")) {
    int t = std::atoi(s);
    if (t >= 1) return t;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int run_solve(const Options& o) {
  Instance inst = load_instance(o.input.empty() ? std::string(LINF_MWU_EXAMPLE) : o.input);
  SolverParams p = to_params(o);
  const Algo algo = parse_algo(o.algo);
  const Backend backend = parse_backend(o.backend);
  SolverRun run;
  nlohmann::json search;
  if (o.normalized) {
    run = solve_with(inst, p, algo, backend);
  } else {
    AutoRun ar = solve_auto(inst, p, algo, backend);
    run = std::move(ar.run);
    search = {{"guess", ar.guess}, {"calls", ar.calls}, {"lo", ar.lo}, {"hi", ar.hi},
              {"least_squares", ar.used_least_squares}};
  }
  const double res = residual_inf(inst, run.x_hat);
  nlohmann::json report = make_report(run, res);
  if (!search.is_null()) report["search"] = search;
  if (!o.trace.empty()) {
    std::ofstream t(o.trace);
    if (!t) throw Error(ErrorCode::io_error, "cannot write " + o.trace);
    run.trace.write_csv(t);
  }
  emit(o.output, dump_json17(report, 2));
  return exit_code_for(run.status);
}

int run_gen(const Options& o) {
  Instance inst = generate(o.seed, o.n, o.d, parse_distribution(o.dist, o.condition));
  if (o.output.empty())
    std::cout << dump_json17(to_json(inst)) << "\n";
  else
    save_instance(inst, o.output);
  return 0;
}

int run_bench_cmd(const Options& o) {
  BenchConfig cfg;
  cfg.ns = o.ns;
  cfg.seeds = o.seeds;
  cfg.seed0 = o.seed;
  cfg.d_dim = o.d;
  cfg.distribution = o.dist;
  cfg.algos.clear();
  for (const auto& a : o.algos) cfg.algos.push_back(parse_algo(a));
  cfg.backend = parse_backend(o.backend);
  cfg.params = to_params(o);
  cfg.target_factor = o.target;
  cfg.threads = threads_from_env();
  BenchResult res = run_bench(cfg);
  std::ostringstream csv;
  write_bench_csv(csv, res);
  if (o.output.empty())
    std::cout << csv.str();
  else
    emit(o.output, csv.str());
  nlohmann::json slopes = nlohmann::json::array();
  for (const auto& s : res.slopes)
    slopes.push_back({{"algo", to_string(s.algo)}, {"slope", s.slope}, {"points", s.points}});
  std::cerr << dump_json17({{"slopes", slopes}}) << "\n";
  return 0;
}

int run_verify_cmd(const Options& o) {
  VerifyConfig cfg;
  cfg.seed = o.seed == 0 ? 1 : o.seed;
  cfg.fault_inject = o.fault_inject;
  auto checks = run_verify(cfg);
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.passed;
    arr.push_back(c.to_json());
    std::cerr << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << " measured=" << c.measured
              << " bound=" << c.bound << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
  }
  emit(o.output, dump_json17({{"passed", all}, {"checks", arr}}, 2));
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linf-mwu: width-reduced multiplicative weights for l-infinity regression"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "solve an instance");
  add_solver_flags(solve, o);
  solve->add_option("--input", o.input, "instance JSON (default: bundled example)");
  solve->add_option("--output", o.output, "report path (default: stdout)");
  solve->add_option("--trace", o.trace, "potential trace CSV path");
  solve->add_flag("--normalized", o.normalized, "skip the scale search; the instance already has optimum 1");

  auto* bench = app.add_subcommand("bench", "iteration-count benchmark");
  add_solver_flags(bench, o);
  bench->add_option("--ns", o.ns, "row counts");
  bench->add_option("--seeds", o.seeds);
  bench->add_option("--algos", o.algos);
  bench->add_option("--d", o.d, "column count");
  bench->add_option("--dist", o.dist);
  bench->add_option("--target", o.target, "stop once the running average reaches 1 + target * eps");
  bench->add_option("--output", o.output, "CSV path (default: stdout)");

  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_option("--seed", o.seed);
  verify->add_flag("--fault-inject", o.fault_inject);
  verify->add_option("--output", o.output);

  auto* gen = app.add_subcommand("gen", "generate a random instance");
  gen->add_option("--n", o.n);
  gen->add_option("--d", o.d);
  gen->add_option("--dist", o.dist, "gaussian | uniform | ill_conditioned");
  gen->add_option("--condition", o.condition);
  gen->add_option("--seed", o.seed);
  gen->add_option("--output", o.output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cout << dump_json17(error_json("usage", e.what())) << "\n";
    return 2;
  }

  try {
    if (*solve) return run_solve(o);
    if (*bench) return run_bench_cmd(o);
    if (*verify) return run_verify_cmd(o);
    if (*gen) return run_gen(o);
  } catch (const Error& e) {
    std::cout << dump_json17(error_json(to_string(e.code()), e.what())) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cout << dump_json17(error_json("internal", e.what())) << "\n";
    return 2;
  }
  return 2;
}
