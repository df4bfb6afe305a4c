#include "linf_mwu/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "linf_mwu/chebyshev.hpp"
#include "linf_mwu/mwu.hpp"
#include "linf_mwu/rng.hpp"
#include "linf_mwu/sketching.hpp"

namespace linf_mwu {

nlohmann::json CheckResult::to_json() const {
  return {{"name", name}, {"passed", passed}, {"measured", measured}, {"bound", bound}, {"detail", detail}};
}

namespace {

Mat gaussian(std::mt19937_64& gen, int r, int c) {
  std::normal_distribution<double> nd;
  Mat M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = nd(gen);
  return M;
}

double rel_err(const Mat& a, const Mat& b) {
  const double scale = std::max(1e-300, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

std::vector<int> random_subset(std::mt19937_64& gen, int n) {
  std::uniform_int_distribution<int> size(1, n);
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), gen);
  all.resize(size(gen));
  return all;
}

}  // namespace

TraceStats run_inverse_trace(MaintainerKind kind, int dim, std::uint64_t seed, int steps, bool fault_inject) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Mat A = gaussian(gen, dim, dim);
  Mat M = A * A.transpose() / dim + Mat::Identity(dim, dim);
  Vec v = gaussian(gen, dim, 1).col(0);
  const bool implicit = kind == MaintainerKind::implicit;
  InverseMaintainer im(kind, M, implicit ? std::optional<Vec>(v) : std::nullopt, true);
  im.set_fault_inject(fault_inject);
  Vec sum = implicit ? Vec(M.lu().solve(v)) : Vec::Zero(dim);
  TraceStats st;
  auto check_sum = [&]() {
    if (implicit) st.max_sum_rel_error = std::max(st.max_sum_rel_error, rel_err(im.query_sum(), sum));
  };
  for (int s = 0; s < steps; ++s) {
    const double pick = u01(gen);
    if (pick < 0.5) {
      std::uniform_int_distribution<int> width(1, 4);
      const int k = width(gen);
      UpdateBatch b;
      b.U = 0.3 * gaussian(gen, dim, k);
      b.V = b.U + 0.05 * gaussian(gen, dim, k);
      b.core = Mat::Zero(k, k);
      for (int j = 0; j < k; ++j) b.core(j, j) = 0.1 + 0.9 * u01(gen);
      M += b.reconstruct();
      im.update(b);
      if (implicit) sum += M.lu().solve(v);
      ++st.updates;
    } else if (pick < 0.6) {
      im.reset();
      ++st.resets;
    } else if (pick < 0.7 && kind != MaintainerKind::one_level) {
      im.partial_reset();
      ++st.partial_resets;
    } else if (pick < 0.75 && implicit) {
      im.accumulate();
      sum += M.lu().solve(v);
    } else {
      std::vector<int> rows = random_subset(gen, dim), cols = random_subset(gen, dim);
      Mat ref = M.inverse();
      Mat want(rows.size(), cols.size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) want(i, j) = ref(rows[i], cols[j]);
      st.max_rel_error = std::max(st.max_rel_error, rel_err(im.query(rows, cols), want));
      ++st.queries;
    }
    check_sum();
  }
  Mat all = im.query_all();
  st.max_rel_error = std::max(st.max_rel_error, rel_err(all, M.inverse()));
  ++st.queries;
  return st;
}

namespace {

CheckResult at_most(const std::string& name, double measured, double bound, const std::string& detail = "") {
  return {name, measured <= bound, measured, bound, detail};
}

Instance normalized_instance(std::uint64_t seed, int n, int d) {
  Instance raw = generate(seed, n, d, parse_distribution("gaussian"));
  ChebyshevResult ref = bruteforce_opt(raw);
  return normalize(raw, ref.opt);
}

}  // namespace

std::vector<CheckResult> run_verify(const VerifyConfig& cfg) {
  std::vector<CheckResult> out;
  const double slack = 1e-6;

  {
    const std::pair<MaintainerKind, const char*> kinds[] = {{MaintainerKind::one_level, "one-level"},
                                                            {MaintainerKind::two_level, "two-level"},
                                                            {MaintainerKind::implicit, "implicit"}};
    for (auto [kind, label] : kinds) {
      double worst = 0, worst_sum = 0;
      for (int t = 0; t < 30; ++t) {
        const int dim = 8 + static_cast<int>(mix_seed(cfg.seed * 1000 + t) % 25);
        TraceStats st = run_inverse_trace(kind, dim, child_seed(cfg.seed, 10, t), 40, cfg.fault_inject);
        worst = std::max(worst, st.max_rel_error);
        worst_sum = std::max(worst_sum, st.max_sum_rel_error);
      }
      out.push_back(at_most(std::string("inverse maintenance equivalence (") + label + ")", worst, 1e-8));
      if (kind == MaintainerKind::implicit) out.push_back(at_most("implicit running sum", worst_sum, 1e-8));
    }
  }

  {
    double worst_gap = 0;
    bool certified = true;
    double agree = 0;
    for (int t = 0; t < 10; ++t) {
      Instance inst = generate(child_seed(cfg.seed, 11, t), 15, 2, parse_distribution("gaussian"));
      ChebyshevResult a = chebyshev_enumerate(inst);
      ChebyshevResult b = chebyshev_simplex(inst);
      certified = certified && a.certified && b.certified;
      worst_gap = std::max({worst_gap, std::abs(a.gap()), std::abs(b.gap())});
      agree = std::max(agree, std::abs(a.opt - b.opt) / std::max(1.0, a.opt));
    }
    CheckResult c = at_most("reference oracle certificates", worst_gap, 1e-9);
    c.passed = c.passed && certified;
    out.push_back(c);
    out.push_back(at_most("reference oracle routes agree", agree, 1e-9));
  }

  const Algo algos[] = {Algo::monotone, Algo::stable, Algo::robust, Algo::opt};
  double worst_res[4] = {0, 0, 0, 0};
  double lazy = 0, lazy_bound = 0, sandwich = 0, phi_growth = 0, psi_lower = 0, min_w = 1;
  bool monotone_ok = true;
  for (int t = 0; t < cfg.instances; ++t) {
    const int n = 20 + static_cast<int>(mix_seed(cfg.seed + 77 * t) % 30);
    Instance inst = normalized_instance(child_seed(cfg.seed, 12, t), n, 3);
    for (int a = 0; a < 4; ++a) {
      SolverParams p;
      p.seed = child_seed(cfg.seed, 13, t);
      p.max_iters = 2000;
      p.record_trace = false;
      SolverRun run = solve_with(inst, p, algos[a], Backend::direct);
      worst_res[a] = std::max(worst_res[a], run.residual);
      if (algos[a] != Algo::opt) {
        lazy = std::max(lazy, run.invariants.max_log_ratio - run.params.delta);
        sandwich = std::max(sandwich, run.invariants.worst_sandwich);
      }
      phi_growth = std::max(phi_growth, run.invariants.worst_phi_growth);
      if (algos[a] == Algo::monotone) monotone_ok = monotone_ok && run.invariants.weights_monotone;
      else {
        psi_lower = std::max(psi_lower, run.invariants.worst_psi_lower);
        min_w = std::min(min_w, run.invariants.min_weight);
      }
    }
  }
  const char* names[] = {"monotone", "stable", "robust", "opt"};
  for (int a = 0; a < 4; ++a)
    out.push_back(at_most(std::string("approximation (") + names[a] + ")", worst_res[a], a == 2 ? 2.05 : 2.0));
  out.push_back(at_most("lazy resistances within delta", lazy, lazy_bound + 1e-12, "max |ln(rbar/r)| - delta"));
  out.push_back(at_most("potential sandwich", sandwich, 1 + slack));
  out.push_back(at_most("weight-sum growth", phi_growth, 1 + slack));
  out.push_back(at_most("energy lower bound", psi_lower, 1 + slack));
  {
    CheckResult c{"weights positive", min_w > 0, min_w, 0, "min weight over non-monotone runs"};
    out.push_back(c);
    out.push_back({"monotone weights nondecreasing", monotone_ok, monotone_ok ? 1.0 : 0.0, 1, ""});
  }

  {
    Instance inst = normalized_instance(child_seed(cfg.seed, 14, 0), 40, 3);
    SolverParams p;
    p.max_iters = 400;
    p.tau = 1.1;
    SolverRun mono = solve_monotone(inst, p);
    out.push_back(at_most("energy growth per width step", mono.invariants.worst_psi_growth, 1 + slack,
                          std::to_string(mono.width_steps) + " width steps"));
    SolverParams q;
    q.max_iters = 400;
    q.rho = 0.3;
    SolverRun st = solve_nonmonotone_stable(double_instance(inst), q);
    out.push_back(at_most("width set size", st.invariants.worst_width_set, 1.0,
                          std::to_string(st.width_steps) + " width steps"));
    out.push_back(at_most("weight-sum growth with width steps", st.invariants.worst_phi_growth, 1 + slack));
  }

  {
    Instance inst = normalized_instance(child_seed(cfg.seed, 15, 0), 48, 3);
    SolverParams p;
    p.max_iters = 1500;
    p.fault_inject = cfg.fault_inject;
    SolverRun a = solve_monotone(inst, p, Backend::direct);
    SolverRun b = solve_monotone(inst, p, Backend::one_level);
    double worst = rel_err(b.x_hat, a.x_hat);
    for (std::size_t i = 0; i < std::min(a.trace.size(), b.trace.size()); ++i)
      worst = std::max(worst, std::abs(a.trace.records[i].psi - b.trace.records[i].psi) / a.trace.records[i].psi);
    if (a.trace.size() != b.trace.size()) worst = INFINITY;
    out.push_back(at_most("backend invariance", worst, 1e-7));

    SolverParams q;
    q.max_iters = 300;
    q.seed = cfg.seed;
    q.fault_inject = cfg.fault_inject;
    SolverRun r = solve_nonmonotone_robust(double_instance(inst), q, Backend::two_level);
    out.push_back(at_most("implicit averaging identity", r.invariants.averaging_error, 1e-8));
  }

  {
    CweSketch S(64, 50, cfg.seed);
    Mat D = S.dense();
    Mat G = D.transpose() * D;
    out.push_back(at_most("embedding unit diagonal", (G.diagonal().array() - 1.0).abs().maxCoeff(), 1e-12));
    int ok = 0;
    const int trials = 200;
    std::mt19937_64 gen(cfg.seed);
    for (int t = 0; t < trials; ++t) {
      Vec x = gaussian(gen, 200, 1).col(0);
      JlSketch J(jl_rows(0.2, 200, 0.01), 200, child_seed(cfg.seed, 16, t));
      const double ratio = J.norm(x) / x.norm();
      if (ratio >= 0.8 && ratio <= 1.2) ++ok;
    }
    CheckResult c = at_most("norm sketch failures", 1.0 - static_cast<double>(ok) / trials, 0.01);
    out.push_back(c);
  }
  return out;
}

}  // namespace linf_mwu
