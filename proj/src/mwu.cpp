#include "linf_mwu/mwu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "linf_mwu/error.hpp"
#include "linf_mwu/lazy_update.hpp"
#include "linf_mwu/rng.hpp"
#include "linf_mwu/sketching.hpp"

namespace linf_mwu {

namespace {

constexpr double kPsiClamp = 1e-12;

enum Stream : std::uint64_t { kCwe = 1, kL3 = 2, kCalib = 3, kHeavy = 4, kJl = 5 };

}  // namespace

const char* to_string(Algo a) {
  switch (a) {
    case Algo::monotone: return "monotone";
    case Algo::stable: return "stable";
    case Algo::robust: return "robust";
    case Algo::opt: return "opt";
    case Algo::baseline: return "baseline-unaccelerated";
  }
  return "?";
}

const char* to_string(Backend b) {
  switch (b) {
    case Backend::direct: return "direct";
    case Backend::one_level: return "one-level";
    case Backend::two_level: return "two-level";
  }
  return "?";
}

const char* to_string(LazyScheme s) { return s == LazyScheme::dyadic ? "dyadic" : "cubic"; }

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::iter_cap: return "iter-cap";
    case RunStatus::width_cap: return "width-cap";
    case RunStatus::psi0_clamped: return "psi0-clamped";
    case RunStatus::degraded_woodbury: return "degraded-woodbury";
    case RunStatus::statistical_failure: return "statistical-failure";
    case RunStatus::search_failure: return "search-failure";
  }
  return "?";
}

Algo parse_algo(const std::string& s) {
  if (s == "monotone") return Algo::monotone;
  if (s == "stable") return Algo::stable;
  if (s == "robust") return Algo::robust;
  if (s == "opt") return Algo::opt;
  if (s == "baseline-unaccelerated" || s == "baseline") return Algo::baseline;
  throw Error(ErrorCode::invalid_parameter, "unknown algorithm: " + s);
}

Backend parse_backend(const std::string& s) {
  if (s == "direct") return Backend::direct;
  if (s == "one-level") return Backend::one_level;
  if (s == "two-level") return Backend::two_level;
  throw Error(ErrorCode::invalid_parameter, "unknown backend: " + s);
}

LazyScheme parse_lazy_scheme(const std::string& s) {
  if (s == "dyadic") return LazyScheme::dyadic;
  if (s == "cubic") return LazyScheme::cubic;
  throw Error(ErrorCode::invalid_parameter, "unknown lazy scheme: " + s);
}

nlohmann::json ResolvedParams::to_json() const {
  return {{"n", n},           {"epsilon", epsilon},       {"delta", delta},     {"eta", eta},
          {"alpha", alpha},   {"alpha_plus", alpha_plus}, {"alpha_minus", alpha_minus},
          {"tau", tau},       {"rho", rho},               {"T", T},             {"b", b},
          {"c_rho", c_rho},   {"max_iters", max_iters},   {"width_cap", width_cap},
          {"psi0", psi0},     {"psi0_clamped", psi0_clamped}, {"c3", c3},       {"zeta", zeta}};
}

nlohmann::json StabilityReport::to_json() const {
  return {{"l3_primal_mass", l3_primal_mass}, {"l3_primal_total", l3_primal_total}, {"l3_width_mass", l3_width_mass},
          {"max_l2_step", max_l2_step},       {"max_fake_l2_step", max_fake_l2_step},
          {"max_fake_drift", max_fake_drift}, {"min_fake_ratio", min_fake_ratio}};
}

nlohmann::json InvariantReport::to_json() const {
  return {{"checks", checks},
          {"max_log_ratio", max_log_ratio},
          {"worst_sandwich", worst_sandwich},
          {"worst_phi_growth", worst_phi_growth},
          {"worst_psi_growth", worst_psi_growth},
          {"worst_psi_lower", worst_psi_lower},
          {"min_weight", min_weight},
          {"weights_monotone", weights_monotone},
          {"max_width_set", max_width_set},
          {"worst_width_set", worst_width_set},
          {"zeta_fallbacks", zeta_fallbacks},
          {"averaging_error", averaging_error}};
}

ResolvedParams resolve_params(Algo algo, int n, double psi0, const SolverParams& p) {
  const double eps = p.epsilon;
  if (!(eps > 0 && eps < 0.5)) throw Error(ErrorCode::invalid_parameter, "epsilon must lie in (0, 1/2)");
  if (n < 1) throw Error(ErrorCode::invalid_parameter, "need at least one row");
  ResolvedParams rp;
  rp.n = n;
  rp.epsilon = eps;
  const double nd = n;
  rp.log_n = std::log(std::max(3.0, nd));
  rp.psi0_clamped = !(psi0 > kPsiClamp);
  rp.psi0 = std::max(psi0, kPsiClamp);
  rp.log_psi = std::log(std::max(3.0, nd) / rp.psi0);
  switch (algo) {
    case Algo::monotone: {
      rp.eta = p.eta.value_or(1.0 / 6.0);
      rp.alpha = std::pow(nd, -0.5 + rp.eta) * std::cbrt(eps) / rp.log_psi;
      rp.tau = std::pow(nd, 1.0 / 3.0) / std::cbrt(eps) * rp.log_psi;
      rp.delta = eps / 6.0;
      break;
    }
    case Algo::stable:
    case Algo::robust: {
      rp.eta = p.eta.value_or(0.1);
      rp.alpha = std::pow(nd, -0.5 + rp.eta) * eps;
      const double tau_exp = algo == Algo::stable ? 0.5 - rp.eta : 0.5 + rp.eta;
      rp.tau = std::pow(nd, tau_exp) / std::pow(eps, 4);
      rp.rho = std::pow(nd, 0.5 - 3 * rp.eta) / (eps * eps);
      rp.delta = eps / 100.0;
      if (algo == Algo::robust) rp.b = std::pow(nd, 0.5 + rp.eta) / (eps * eps);
      break;
    }
    case Algo::opt: {
      rp.eta = p.eta.value_or(1.0 / 6.0);
      rp.alpha = std::pow(nd, -0.5 + rp.eta) * std::cbrt(eps);
      rp.tau = std::pow(nd, 1 - 4 * rp.eta) / std::cbrt(eps);
      rp.rho = std::pow(nd, 0.5 - 3 * rp.eta);
      rp.delta = 0;
      break;
    }
    case Algo::baseline: {
      rp.eta = 0;
      rp.alpha = std::sqrt(eps / nd);
      rp.delta = 0;
      break;
    }
  }
  if (p.alpha) rp.alpha = *p.alpha;
  if (p.tau) rp.tau = *p.tau;
  if (p.rho) rp.rho = *p.rho;
  if (p.delta) rp.delta = *p.delta;
  if (p.b) rp.b = *p.b;
  rp.alpha_plus = rp.alpha;
  rp.alpha_minus = rp.alpha / (1 + 2 * eps);
  if (algo == Algo::opt)
    rp.T = rp.log_psi / (rp.alpha * eps * eps);
  else
    rp.T = rp.log_n / (rp.alpha * eps * eps);
  if (p.T) rp.T = *p.T;
  if (!(rp.alpha > 0) || !(rp.T >= 1)) throw Error(ErrorCode::invalid_parameter, "alpha must be positive and T >= 1");
  if (algo != Algo::baseline && !(rp.tau > 0)) throw Error(ErrorCode::invalid_parameter, "tau must be positive");
  if ((algo == Algo::stable || algo == Algo::robust || algo == Algo::opt) && !(rp.rho > 0))
    throw Error(ErrorCode::invalid_parameter, "rho must be positive");
  if ((algo == Algo::monotone || algo == Algo::stable || algo == Algo::robust) && !(rp.delta > 0))
    throw Error(ErrorCode::invalid_parameter, "delta must be positive");
  if (algo == Algo::robust && !(rp.b >= 1)) throw Error(ErrorCode::invalid_parameter, "sketch rows b must be >= 1");
  rp.T_int = static_cast<long>(std::ceil(rp.T - 1e-9));
  rp.max_iters = p.max_iters ? *p.max_iters : std::min<long>(rp.T_int, 50L * n);
  if (rp.max_iters < 1) throw Error(ErrorCode::invalid_parameter, "max_iters must be >= 1");
  if (rp.rho > 0) {
    const double target = std::sqrt(nd / eps);
    int c = 0;
    while (std::ldexp(rp.rho, c) < target) ++c;
    rp.c_rho = p.c_rho.value_or(c);
  }
  switch (algo) {
    case Algo::monotone: rp.width_cap = rp.tau / (eps * eps); break;
    case Algo::stable:
    case Algo::robust:
    case Algo::opt:
      rp.width_cap = std::cbrt(nd * rp.rho) * std::pow(eps, -10.0 / 3.0) * std::pow(rp.log_n, 5) * rp.log_psi;
      break;
    case Algo::baseline: rp.width_cap = 0; break;
  }
  rp.zeta = p.zeta.value_or(nd);
  return rp;
}

namespace {

// Lazy rbar maintenance, or exact rbar = r when delta is zero.
class Lazy {
 public:
  Lazy(int m, double delta, LazyScheme scheme, long T, double zeta, bool keep_log) {
    if (delta <= 0) return;
    if (scheme == LazyScheme::dyadic)
      sv_ = std::make_unique<SelectVector>(m, delta, keep_log);
    else
      l3_ = std::make_unique<SelectVectorL3>(m, delta, T, zeta, keep_log);
  }

  const Vec& select(const Vec& r, long t) {
    if (sv_) return sv_->select(r, t), sv_->rbar();
    if (l3_) return l3_->select(r, t), l3_->rbar();
    exact_ = r;
    return exact_;
  }

  void note_width(long i, const std::vector<int>& coords, const Vec& r) {
    if (sv_) sv_->note_width_update(i, coords, r);
    else if (l3_) l3_->note_width_update(i, coords, r);
    else exact_ = r;
  }

  const Vec& rbar() const { return sv_ ? sv_->rbar() : l3_ ? l3_->rbar() : exact_; }

  std::vector<std::vector<int>> log() const {
    if (sv_) return sv_->update_log();
    if (l3_) return l3_->update_log();
    return {};
  }

 private:
  std::unique_ptr<SelectVector> sv_;
  std::unique_ptr<SelectVectorL3> l3_;
  Vec exact_;
};

// Routes oracle calls to a direct solve or a maintained inverse, tracking rbar changes.
class Oracle {
 public:
  Oracle(const RowMat& C, const Vec& d, const Vec& rbar0, Backend backend, bool implicit, const SolverParams& p)
      : C_(C), d_(d), prev_(rbar0) {
    if (backend != Backend::direct) {
      MaintainedConfig mc;
      mc.kind = backend == Backend::one_level ? MaintainerKind::one_level
                : implicit                    ? MaintainerKind::implicit
                                              : MaintainerKind::two_level;
      mc.a0 = p.a0;
      mc.a1 = p.a1;
      mc.fault_inject = p.fault_inject;
      maint_ = std::make_unique<MaintainedOracle>(C, d, rbar0, mc);
    }
  }

  OracleResult solve(const Vec& rbar, long& rank) {
    changes_.clear();
    for (int e = 0; e < rbar.size(); ++e)
      if (rbar(e) != prev_(e)) changes_.emplace_back(e, rbar(e));
    rank = first_ ? rbar.size() : static_cast<long>(changes_.size());
    first_ = false;
    prev_ = rbar;
    if (!maint_) return solve_direct(C_, d_, rbar);
    return maint_->solve_full(changes_);
  }

  bool implicit() const { return maint_ && maint_->maintainer().kind() == MaintainerKind::implicit; }
  void accumulate() {
    if (implicit()) maint_->accumulate_step();
  }
  std::pair<Vec, double> accumulated() const { return maint_->accumulated(); }
  OpCounts op_counts() const { return maint_ ? maint_->op_counts() : OpCounts{}; }
  bool degraded() const { return maint_ && maint_->degraded(); }

 private:
  const RowMat& C_;
  const Vec& d_;
  Vec prev_;
  bool first_ = true;
  std::vector<std::pair<int, double>> changes_;
  std::unique_ptr<MaintainedOracle> maint_;
};

Vec resistances(const Vec& w, double floor_coeff) { return (w.array() + floor_coeff * w.sum()).matrix(); }

double max_log_ratio(const Vec& a, const Vec& b) { return (a.array() / b.array()).log().abs().maxCoeff(); }

// Phi growth factors per primal and per width step.
struct PhiBound {
  double lnP = 0;
  double lnW = 0;
};

PhiBound phi_bound(Algo algo, const ResolvedParams& rp) {
  const double eps = rp.epsilon, del = rp.delta, a = rp.alpha;
  PhiBound pb;
  switch (algo) {
    case Algo::monotone:
      pb.lnP = std::log1p(std::exp(eps + del) * eps * a);
      pb.lnW = std::log1p(std::exp(eps + del) * eps / rp.tau);
      break;
    case Algo::stable:
      pb.lnP = std::log1p(eps * rp.alpha_plus * std::exp(eps + del));
      pb.lnW = std::log1p(eps * std::exp(eps + 2 * del) * (1 / rp.tau + 1 / (rp.rho * rp.rho)));
      break;
    case Algo::robust: {
      const double c2 = std::ceil(rp.log_n);
      const double nd = rp.n;
      pb.lnP = std::log1p(std::exp(eps + del) * eps * a * (1 + c2 / std::sqrt(rp.b)) +
                          2 * std::exp(eps + 2 * del) * eps * eps * a * a * (1 + c2 * c2 * nd / (rp.b * eps)));
      pb.lnW = std::log1p(eps * std::exp(eps + 2 * del) * (1 / rp.tau + 1 / (rp.rho * rp.rho)));
      break;
    }
    case Algo::opt:
      pb.lnP = std::log1p(eps * rp.alpha_plus * std::exp(eps / 2));
      pb.lnW = std::log1p(2 * eps * std::exp(eps) / rp.tau);
      break;
    case Algo::baseline:
      pb.lnP = std::log1p(std::exp(eps) * eps * a);
      break;
  }
  return pb;
}

Instance top_half(const DoubledInstance& dbl) {
  Instance inst;
  inst.n = dbl.half();
  inst.d_dim = static_cast<int>(dbl.C_tilde.cols());
  inst.C = dbl.C_tilde.topRows(inst.n);
  inst.target = dbl.d_tilde.head(inst.n);
  return inst;
}

void check_doubled(const DoubledInstance& dbl) {
  const int m = dbl.rows();
  if (m < 2 || m % 2 != 0 || dbl.d_tilde.size() != m)
    throw Error(ErrorCode::invalid_instance, "doubled instance must have an even, matching row count");
  const int n = m / 2;
  if (!dbl.C_tilde.topRows(n).isApprox(-dbl.C_tilde.bottomRows(n), 0) ||
      dbl.d_tilde.head(n) != -dbl.d_tilde.tail(n))
    throw Error(ErrorCode::invalid_instance, "bottom half must negate the top half");
}

SolverRun short_circuit(const Instance& inst, Algo algo, const SolverParams& p, double psi0) {
  SolverRun run;
  run.params = resolve_params(algo, inst.n, psi0, p);
  run.x_hat = least_squares(inst);
  run.residual = residual_inf(inst, run.x_hat);
  run.status = RunStatus::psi0_clamped;
  return run;
}

// Running-average tracking for the iteration cap and early stop.
struct AverageTracker {
  bool active = false;
  double best = std::numeric_limits<double>::infinity();
  Vec best_x;

  // Returns the residual of x / count.
  template <class Inst>
  double observe(const Inst& inst, const Vec& x, long count) {
    Vec avg = x / static_cast<double>(count);
    double res = residual_inf(inst, avg);
    if (res < best) {
      best = res;
      best_x = avg;
    }
    return res;
  }
};

template <class Inst>
void finish(SolverRun& run, const Inst& inst, const Vec& x, long i, AverageTracker& avg, bool stopped) {
  if (run.status == RunStatus::iter_cap && avg.best_x.size() > 0)
    run.x_hat = avg.best_x;
  else if (i > 0)
    run.x_hat = x / static_cast<double>(i);
  else
    run.x_hat = Vec::Zero(x.size());
  (void)stopped;
  run.residual = residual_inf(inst, run.x_hat);
}

// Shared loop of the monotone solver (width reduction on) and the unaccelerated baseline (off).
SolverRun run_monotone(const Instance& inst, const SolverParams& p, Backend backend, Algo algo) {
  inst.validate();
  const double psi0 = psi_lower_bound(inst);
  if (!(psi0 > kPsiClamp)) return short_circuit(inst, algo, p, psi0);
  SolverRun run;
  run.params = resolve_params(algo, inst.n, psi0, p);
  const ResolvedParams& rp = run.params;
  const bool widths = algo == Algo::monotone;
  const int n = inst.n;
  const double eps = rp.epsilon;
  const double floor_coeff = eps / n;
  const PhiBound pb = phi_bound(algo, rp);
  const long horizon = rp.T_int + static_cast<long>(std::ceil(rp.width_cap)) + 1;

  Vec w = Vec::Ones(n);
  Vec r = resistances(w, floor_coeff);
  Vec x = Vec::Zero(inst.d_dim);
  Lazy lazy(n, widths ? rp.delta : 0.0, p.lazy, horizon, rp.zeta, p.keep_update_log);
  const Vec* rbar = &lazy.select(r, 0);
  Oracle oracle(inst.C, inst.target, *rbar, widths ? backend : Backend::direct, false, p);
  AverageTracker avg;
  avg.active = p.stop_residual > 0 || rp.max_iters < rp.T_int;
  InvariantReport& inv = run.invariants;
  StabilityReport& st = run.stability;
  inv.min_weight = 1;
  const double log_phi0 = std::log(static_cast<double>(n));
  double psi_r0 = -1;
  const double ln_psi_step = std::log1p(eps * eps * rp.tau * rp.tau / (4.0 * n));
  long i = 0, k = 0;
  bool stopped = false;

  while (i < rp.T_int) {
    if (i >= rp.max_iters) {
      run.status = RunStatus::iter_cap;
      break;
    }
    if (widths && k > rp.width_cap) {
      run.status = RunStatus::width_cap;
      break;
    }
    if (i + k > 0) rbar = &lazy.select(r, i + k);
    long rank = 0;
    OracleResult res = oracle.solve(*rbar, rank);
    const Vec& u = res.residual_u;
    const double umax = u.cwiseAbs().maxCoeff();
    const double ph = phi(w);
    if (psi_r0 < 0) psi_r0 = res.psi;

    ++inv.checks;
    inv.max_log_ratio = std::max(inv.max_log_ratio, max_log_ratio(*rbar, r));
    inv.worst_sandwich = std::max(inv.worst_sandwich, res.psi / (std::exp(eps + rp.delta) * ph));
    inv.worst_phi_growth =
        std::max(inv.worst_phi_growth, std::exp(std::log(ph) - log_phi0 - i * pb.lnP - k * pb.lnW));
    if (widths) inv.worst_psi_growth = std::max(inv.worst_psi_growth, std::exp(std::log(psi_r0) + k * ln_psi_step) / res.psi);

    TraceRecord rec{i, k, StepKind::primal, ph, res.psi, 0, umax, rank};
    if (!widths || umax <= rp.tau) {
      Vec w_new = (w.array() * (1.0 + eps * rp.alpha * u.array().abs())).matrix();
      Vec r_new = resistances(w_new, floor_coeff);
      if ((w_new.array() < w.array()).any()) inv.weights_monotone = false;
      const double cut = 1 + 3 * eps * rp.alpha;
      double l3 = 0, l3_all = 0, l2 = 0;
      for (int e = 0; e < n; ++e) {
        const double q = r_new(e) / r(e);
        const double c3 = std::abs(q - 1) * (q - 1) * (q - 1);
        if (q >= cut) l3 += c3;
        l3_all += c3;
        const double lq = std::log(q);
        l2 += lq * lq;
      }
      st.l3_primal_mass += l3;
      st.l3_primal_total += l3_all;
      st.max_l2_step = std::max(st.max_l2_step, l2);
      run.l2_steps.push_back(l2);
      x += res.delta;
      w = std::move(w_new);
      r = std::move(r_new);
      ++i;
      if (avg.active) {
        double resid = avg.observe(inst, x, i);
        if (p.stop_residual > 0 && resid <= p.stop_residual) stopped = true;
      }
    } else {
      rec.step = StepKind::width;
      std::vector<int> coords;
      for (int e = 0; e < n; ++e)
        if (std::abs(u(e)) >= rp.tau) coords.push_back(e);
      const double ph_old = w.sum();
      Vec w_new = w;
      for (int e : coords) w_new(e) = (1 + eps) * w(e) + eps * eps / n * ph_old;
      Vec r_new = resistances(w_new, floor_coeff);
      if ((w_new.array() < w.array()).any()) inv.weights_monotone = false;
      st.l3_width_mass += ((r_new.array() / r.array()) - 1.0).cube().sum();
      rec.width_set_size = static_cast<long>(coords.size());
      inv.max_width_set = std::max(inv.max_width_set, rec.width_set_size);
      w = std::move(w_new);
      r = std::move(r_new);
      ++k;
    }
    inv.min_weight = std::min(inv.min_weight, w.minCoeff());
    if (p.record_trace) run.trace.record(rec);
    if (stopped) break;
  }
  inv.worst_phi_growth =
      std::max(inv.worst_phi_growth, std::exp(std::log(phi(w)) - log_phi0 - i * pb.lnP - k * pb.lnW));
  run.primal_steps = i;
  run.width_steps = k;
  run.op_counts = oracle.op_counts();
  run.degraded = oracle.degraded();
  if (run.degraded && run.status == RunStatus::ok) run.status = RunStatus::degraded_woodbury;
  if (p.keep_update_log) run.update_log = lazy.log();
  finish(run, inst, x, i, avg, stopped);
  return run;
}

SolverRun run_nonmonotone(const DoubledInstance& dbl, const SolverParams& p, Backend backend, Algo algo) {
  check_doubled(dbl);
  const Instance half = top_half(dbl);
  half.validate();
  const double psi0 = psi_lower_bound(half);
  if (!(psi0 > kPsiClamp)) {
    SolverRun run = short_circuit(half, algo, p, psi0);
    run.residual = residual_inf(dbl, run.x_hat);
    return run;
  }
  SolverRun run;
  run.params = resolve_params(algo, half.n, psi0, p);
  ResolvedParams& rp = run.params;
  const bool robust = algo == Algo::robust;
  const int n = half.n;
  const int m = 2 * n;
  const double eps = rp.epsilon;
  const double floor_coeff = eps / (2.0 * n);
  const RowMat& C = dbl.C_tilde;
  const Vec& d = dbl.d_tilde;

  if (robust && !p.exact_l3) rp.c3 = calibrate_c3(m, child_seed(p.seed, kCalib, 0), 200);
  const PhiBound pb = phi_bound(algo, rp);
  const long horizon = rp.T_int + static_cast<long>(std::min(rp.width_cap, 1e9)) + 1;

  Vec w = Vec::Ones(m);
  Vec r = resistances(w, floor_coeff);
  Vec x = Vec::Zero(C.cols());
  Lazy lazy(m, rp.delta, LazyScheme::dyadic, horizon, rp.zeta, p.keep_update_log);
  lazy.select(r, 0);
  Oracle oracle(C, d, lazy.rbar(), backend, robust, p);

  std::unique_ptr<HeavyHitterSketch> hh;
  const double eps_heavy = std::min(0.5, rp.rho * std::sqrt(eps) / (2 * rp.c3 * std::sqrt(static_cast<double>(n))));
  const double hh_fail = 1.0 / (static_cast<double>(n) * n * n);
  AverageTracker avg;
  avg.active = p.stop_residual > 0 || rp.max_iters < rp.T_int;
  InvariantReport& inv = run.invariants;
  StabilityReport& st = run.stability;
  inv.min_weight = 1;
  const double log_phi0 = std::log(static_cast<double>(m));
  double psi_r0 = -1;
  const double h_bound = 2.0 * n * std::exp(eps + 2 * rp.delta) / (rp.tau * eps) + 1;
  Vec drift = Vec::Zero(m), drift_hi = Vec::Zero(m), drift_lo = Vec::Zero(m);
  long i = 0, k = 0;
  bool stopped = false;

  while (i < rp.T_int) {
    if (i >= rp.max_iters) {
      run.status = RunStatus::iter_cap;
      break;
    }
    if (k > rp.width_cap) {
      run.status = RunStatus::width_cap;
      break;
    }
    const Vec& rbar = lazy.rbar();
    long rank = 0;
    OracleResult res = oracle.solve(rbar, rank);
    const Vec& u = res.residual_u;
    const double umax = u.cwiseAbs().maxCoeff();
    const double ph = phi(w);
    if (psi_r0 < 0) psi_r0 = res.psi;

    ++inv.checks;
    inv.max_log_ratio = std::max(inv.max_log_ratio, max_log_ratio(rbar, r));
    inv.worst_sandwich = std::max(inv.worst_sandwich, res.psi / (std::exp(eps + rp.delta) * ph));
    inv.worst_phi_growth =
        std::max(inv.worst_phi_growth, std::exp(std::log(ph) - log_phi0 - i * pb.lnP - k * pb.lnW));
    inv.worst_psi_lower =
        std::max(inv.worst_psi_lower, std::exp(-rp.delta) * psi_r0 / (1 + 2 * eps) / res.psi);

    double psi = res.psi;
    if (p.jl_psi) {
      JlSketch jl(jl_rows(eps, m, 1.0 / n), m, child_seed(p.seed, kJl, i + k));
      double nrm = jl.norm((rbar.array().sqrt() * u.array()).matrix());
      psi = nrm * nrm;
    }
    double cubic;
    if (robust && !p.exact_l3) {
      L3Sketch l3(m, child_seed(p.seed, kL3, i + k));
      double est = l3.estimate((rbar.array().pow(1.0 / 3.0) * u.array()).matrix());
      cubic = est * est * est;
    } else {
      cubic = (rbar.array() * u.array().abs().cube()).sum();
    }
    const bool primal = robust ? cubic <= rp.c3 * rp.rho * psi : cubic <= 2 * rp.rho * psi;

    TraceRecord rec{i, k, StepKind::primal, ph, res.psi, 0, umax, rank};
    if (primal) {
      Vec w_new(m);
      Vec uh;
      Vec rates(m);
      if (robust) {
        CweSketch S(static_cast<int>(std::ceil(rp.b)), m, child_seed(p.seed, kCwe, i));
        Vec sr = rbar.array().sqrt();
        uh = (S.apply_roundtrip((sr.array() * u.array()).matrix()).array() / sr.array()).matrix();
        for (int e = 0; e < m; ++e) {
          const double q = eps * rp.alpha * uh(e);
          rates(e) = uh(e) >= 0 ? rp.alpha * (1 + q) : rp.alpha / (1 - q);
        }
        w_new = (w.array() * (1.0 + eps * rates.array() * uh.array())).matrix();
      } else {
        for (int e = 0; e < m; ++e) rates(e) = u(e) >= 0 ? rp.alpha_plus : rp.alpha_minus;
        w_new = (w.array() * (1.0 + eps * rates.array() * u.array())).matrix();
      }
      if (!(w_new.minCoeff() > 0))
        throw Error(ErrorCode::invariant_breach, "weight lost positivity in a primal step");
      Vec r_new = resistances(w_new, floor_coeff);
      const double cut = 1 + 3 * eps * rp.alpha;
      double l3 = 0, l3_all = 0, l2 = 0;
      for (int e = 0; e < m; ++e) {
        const double q = r_new(e) / r(e);
        const double c3 = std::abs(q - 1) * (q - 1) * (q - 1);
        if (q >= cut) l3 += c3;
        l3_all += c3;
        const double lq = std::log(q);
        l2 += lq * lq;
      }
      st.l3_primal_mass += l3;
      st.l3_primal_total += l3_all;
      st.max_l2_step = std::max(st.max_l2_step, l2);
      run.l2_steps.push_back(l2);
      if (robust) {
        Vec corr = (w.array() * eps * rp.alpha * (uh - u).array() * (1.0 + rates.array() * uh.array()) /
                    (1.0 + rp.alpha * uh.array()))
                       .matrix();
        Vec rt = r_new - corr;
        st.min_fake_ratio = std::min(st.min_fake_ratio, (rt.array() / r.array()).minCoeff());
        Vec rt_safe = rt.cwiseMax(1e-300);
        const double fl2 = (rt_safe.array() / r.array()).log().square().sum();
        st.max_fake_l2_step = std::max(st.max_fake_l2_step, fl2);
        run.fake_l2_steps.push_back(fl2);
        drift.array() += (rt_safe.array() / r_new.array()).log();
        drift_hi = drift_hi.cwiseMax(drift);
        drift_lo = drift_lo.cwiseMin(drift);
      }
      x += res.delta;
      oracle.accumulate();
      w = std::move(w_new);
      r = std::move(r_new);
      ++i;
      lazy.select(r, i);
      if (avg.active) {
        double resid = avg.observe(dbl, x, i);
        if (p.stop_residual > 0 && resid <= p.stop_residual) stopped = true;
      }
    } else {
      rec.step = StepKind::width;
      std::vector<int> cand;
      const std::vector<int>* cand_ptr = nullptr;
      if (robust) {
        if (!hh || p.refresh_hh)
          hh = std::make_unique<HeavyHitterSketch>(m, eps_heavy, hh_fail,
                                                   child_seed(p.seed, kHeavy, p.refresh_hh ? k : 0));
        cand = hh->decode(hh->sketch((rbar.array().sqrt() * u.array()).matrix()));
        cand_ptr = &cand;
      }
      const double thr = robust ? rp.rho / (2 * rp.c3) : rp.rho;
      WidthChoice ch = select_width_set(u, rbar, psi, rp.tau, rp.rho, thr, n, eps, rp.c_rho, cand_ptr);
      if (ch.coords.empty() && cand_ptr) {
        inv.zeta_fallbacks += 1;
        ch = select_width_set(u, rbar, psi, rp.tau, rp.rho, thr, n, eps, rp.c_rho, nullptr);
      }
      if (ch.coords.empty()) throw Error(ErrorCode::internal_consistency, "width step found no coordinates");
      if (ch.fallback) inv.zeta_fallbacks += 1;
      inv.max_width_set = std::max(inv.max_width_set, ch.h_size);
      inv.worst_width_set = std::max(inv.worst_width_set, ch.h_size / h_bound);
      const double ph_old = w.sum();
      for (int e : ch.coords) w(e) = (1 + eps) * w(e) + eps * eps / (2.0 * n) * ph_old;
      Vec r_new = resistances(w, floor_coeff);
      st.l3_width_mass += ((r_new.array() / r.array()) - 1.0).cube().sum();
      r = std::move(r_new);
      lazy.note_width(i, ch.coords, r);
      rec.width_set_size = static_cast<long>(ch.coords.size());
      ++k;
    }
    inv.min_weight = std::min(inv.min_weight, w.minCoeff());
    if (p.record_trace) run.trace.record(rec);
    if (stopped) break;
  }
  inv.worst_phi_growth =
      std::max(inv.worst_phi_growth, std::exp(std::log(phi(w)) - log_phi0 - i * pb.lnP - k * pb.lnW));
  if (robust) st.max_fake_drift = (drift_hi - drift_lo).maxCoeff();
  run.primal_steps = i;
  run.width_steps = k;
  run.op_counts = oracle.op_counts();
  run.degraded = oracle.degraded();
  if (p.keep_update_log) run.update_log = lazy.log();
  finish(run, dbl, x, i, avg, stopped);
  if (oracle.implicit() && i > 0) {
    auto [sum, count] = oracle.accumulated();
    Vec x_impl = sum / count;
    const double scale = std::max(1.0, run.x_hat.cwiseAbs().maxCoeff());
    if (run.status != RunStatus::iter_cap) {
      inv.averaging_error = (x_impl - x / static_cast<double>(i)).cwiseAbs().maxCoeff() / scale;
      run.x_hat = x_impl;
      run.residual = residual_inf(dbl, run.x_hat);
    }
  }
  if (run.degraded && run.status == RunStatus::ok) run.status = RunStatus::degraded_woodbury;
  if (robust && run.status == RunStatus::ok && !stopped && run.residual > 1 + 10.5 * eps)
    run.status = RunStatus::statistical_failure;
  return run;
}

}  // namespace

WidthChoice select_width_set(const Vec& u, const Vec& rbar, double psi, double tau, double rho, double s_threshold,
                             int n, double eps, int c_rho, const std::vector<int>* candidates) {
  if (u.size() != rbar.size()) throw Error(ErrorCode::dimension_mismatch, "residual and rbar lengths differ");
  WidthChoice ch;
  std::vector<int> S;
  if (candidates) {
    std::vector<char> seen(u.size(), 0);
    for (int e : *candidates) {
      if (e < 0 || e >= u.size()) throw Error(ErrorCode::dimension_mismatch, "candidate index out of range");
      if (!seen[e] && std::abs(u(e)) >= s_threshold) S.push_back(e);
      seen[e] = 1;
    }
  } else {
    for (int e = 0; e < u.size(); ++e)
      if (std::abs(u(e)) >= s_threshold) S.push_back(e);
  }
  std::sort(S.begin(), S.end(), [&](int a, int b) { return rbar(a) != rbar(b) ? rbar(a) > rbar(b) : a < b; });
  const double budget = psi / tau;
  double used = 0;
  std::vector<int> H, rest;
  for (int e : S) {
    if (used + rbar(e) <= budget) {
      H.push_back(e);
      used += rbar(e);
    } else {
      rest.push_back(e);
    }
  }
  ch.s_size = static_cast<long>(S.size());
  ch.h_size = static_cast<long>(H.size());
  if (!rest.empty()) {
    ch.coords = H;
    ch.coords.push_back(rest.front());
    ch.extra = true;
    return ch;
  }
  const double thr = rho * psi / std::max(1.0, std::log(n / (eps * rho)));
  double best_mass = -1;
  std::vector<int> best;
  for (int c = 0; c <= c_rho; ++c) {
    const double zeta = std::ldexp(rho, c);
    std::vector<int> Hz;
    double mass = 0;
    for (int e : H) {
      const double a = std::abs(u(e));
      if (a >= zeta && a < 2 * zeta) {
        Hz.push_back(e);
        mass += rbar(e) * a * a * a;
      }
    }
    if (!Hz.empty() && mass >= thr) {
      ch.coords = std::move(Hz);
      ch.zeta_star = zeta;
      return ch;
    }
    if (!Hz.empty() && mass > best_mass) {
      best_mass = mass;
      best = std::move(Hz);
    }
  }
  ch.fallback = true;
  ch.coords = best.empty() ? H : best;
  return ch;
}

SolverRun solve_monotone(const Instance& inst, const SolverParams& p, Backend backend) {
  return run_monotone(inst, p, backend, Algo::monotone);
}

SolverRun solve_baseline(const Instance& inst, const SolverParams& p) {
  return run_monotone(inst, p, Backend::direct, Algo::baseline);
}

SolverRun solve_nonmonotone_stable(const DoubledInstance& dbl, const SolverParams& p, Backend backend) {
  return run_nonmonotone(dbl, p, backend, Algo::stable);
}

SolverRun solve_nonmonotone_robust(const DoubledInstance& dbl, const SolverParams& p, Backend backend) {
  return run_nonmonotone(dbl, p, backend, Algo::robust);
}

SolverRun solve_nonmonotone_opt(const DoubledInstance& dbl, const SolverParams& p) {
  check_doubled(dbl);
  const Instance half = top_half(dbl);
  half.validate();
  const double psi0 = psi_lower_bound(half);
  if (!(psi0 > kPsiClamp)) {
    SolverRun run = short_circuit(half, Algo::opt, p, psi0);
    run.residual = residual_inf(dbl, run.x_hat);
    return run;
  }
  SolverRun run;
  run.params = resolve_params(Algo::opt, half.n, psi0, p);
  const ResolvedParams& rp = run.params;
  const int n = half.n;
  const int m = 2 * n;
  const double eps = rp.epsilon;
  const double floor_coeff = eps / (2.0 * n);
  const PhiBound pb = phi_bound(Algo::opt, rp);
  const RowMat& C = dbl.C_tilde;
  const Vec& d = dbl.d_tilde;

  Vec w = Vec::Ones(m);
  Vec x = Vec::Zero(C.cols());
  AverageTracker avg;
  avg.active = p.stop_residual > 0 || rp.max_iters < rp.T_int;
  InvariantReport& inv = run.invariants;
  StabilityReport& st = run.stability;
  inv.min_weight = 1;
  const double log_phi0 = std::log(static_cast<double>(m));
  double psi_r0 = -1;
  long i = 0, k = 0;
  bool stopped = false;

  while (i < rp.T_int) {
    if (i >= rp.max_iters) {
      run.status = RunStatus::iter_cap;
      break;
    }
    if (k > rp.width_cap) {
      run.status = RunStatus::width_cap;
      break;
    }
    Vec r = resistances(w, floor_coeff);
    OracleResult res = solve_direct(C, d, r);
    const Vec& u = res.residual_u;
    const double umax = u.cwiseAbs().maxCoeff();
    const double ph = phi(w);
    if (psi_r0 < 0) psi_r0 = res.psi;
    ++inv.checks;
    inv.worst_sandwich = std::max(inv.worst_sandwich, res.psi / (std::exp(eps) * ph));
    inv.worst_phi_growth =
        std::max(inv.worst_phi_growth, std::exp(std::log(ph) - log_phi0 - i * pb.lnP - k * pb.lnW));
    inv.worst_psi_lower = std::max(inv.worst_psi_lower, psi_r0 / (1 + 2 * eps) / res.psi);

    const double cubic = (r.array() * u.array().abs().cube()).sum();
    TraceRecord rec{i, k, StepKind::primal, ph, res.psi, 0, umax, m};
    if (cubic <= 2 * rp.rho * res.psi) {
      Vec w_new(m);
      for (int e = 0; e < m; ++e) w_new(e) = w(e) * (1 + eps * (u(e) >= 0 ? rp.alpha_plus : rp.alpha_minus) * u(e));
      if (!(w_new.minCoeff() > 0))
        throw Error(ErrorCode::invariant_breach, "weight lost positivity in a primal step");
      Vec r_new = resistances(w_new, floor_coeff);
      double l2 = (r_new.array() / r.array()).log().square().sum();
      st.max_l2_step = std::max(st.max_l2_step, l2);
      run.l2_steps.push_back(l2);
      x += res.delta;
      w = std::move(w_new);
      ++i;
      if (avg.active) {
        double resid = avg.observe(dbl, x, i);
        if (p.stop_residual > 0 && resid <= p.stop_residual) stopped = true;
      }
    } else {
      rec.step = StepKind::width;
      std::vector<int> S;
      for (int e = 0; e < m; ++e)
        if (std::abs(u(e)) >= rp.rho) S.push_back(e);
      std::sort(S.begin(), S.end(), [&](int a, int b) { return r(a) != r(b) ? r(a) > r(b) : a < b; });
      const double budget = res.psi / rp.tau;
      double used = 0;
      std::vector<int> H;
      int extra = -1;
      for (int e : S) {
        if (used + r(e) <= budget) {
          H.push_back(e);
          used += r(e);
        } else if (extra < 0) {
          extra = e;
        }
      }
      const double ph_old = w.sum();
      for (int e : H) w(e) = (1 + eps) * w(e) + eps * eps / n * ph_old;
      if (extra >= 0) {
        const double g = width_gamma(r(extra), res.psi, rp.tau);
        w(extra) = (1 + eps * g) * w(extra) + eps * eps * g / n * ph_old;
      }
      rec.width_set_size = static_cast<long>(H.size()) + (extra >= 0 ? 1 : 0);
      inv.max_width_set = std::max(inv.max_width_set, static_cast<long>(H.size()));
      ++k;
    }
    inv.min_weight = std::min(inv.min_weight, w.minCoeff());
    if (p.record_trace) run.trace.record(rec);
    if (stopped) break;
  }
  inv.worst_phi_growth =
      std::max(inv.worst_phi_growth, std::exp(std::log(phi(w)) - log_phi0 - i * pb.lnP - k * pb.lnW));
  run.primal_steps = i;
  run.width_steps = k;
  finish(run, dbl, x, i, avg, stopped);
  return run;
}

double width_gamma(double r_e, double psi, double tau) { return std::min(1.0, psi / (tau * r_e)); }

SolverRun solve_with(const Instance& inst, const SolverParams& p, Algo algo, Backend backend) {
  switch (algo) {
    case Algo::monotone: return solve_monotone(inst, p, backend);
    case Algo::baseline: return solve_baseline(inst, p);
    case Algo::stable: return solve_nonmonotone_stable(double_instance(inst), p, backend);
    case Algo::robust: return solve_nonmonotone_robust(double_instance(inst), p, backend);
    case Algo::opt: return solve_nonmonotone_opt(double_instance(inst), p);
  }
  throw Error(ErrorCode::invalid_parameter, "unknown algorithm");
}

AutoRun solve_auto(const Instance& inst, const SolverParams& p, Algo algo, Backend backend) {
  inst.validate();
  AutoRun out;
  const Vec x2 = least_squares(inst);
  const Vec r2 = inst.C * x2 - inst.target;
  const double hi0 = r2.cwiseAbs().maxCoeff();
  out.lo = r2.norm() / std::sqrt(static_cast<double>(inst.n));
  out.hi = hi0;
  const double eps = p.epsilon;
  if (!(eps > 0 && eps < 0.5)) throw Error(ErrorCode::invalid_parameter, "epsilon must lie in (0, 1/2)");
  if (!(psi_lower_bound(inst) > kPsiClamp) || !(hi0 > 0)) {
    out.run = solve_with(inst, p, algo, backend);
    out.residual = residual_inf(inst, out.run.x_hat);
    out.guess = 0;
    out.calls = 1;
    return out;
  }
  // The least-squares point already certifies guess = hi.
  out.run.x_hat = x2;
  out.run.residual = 1.0;
  out.run.status = RunStatus::ok;
  out.guess = hi0;
  out.residual = hi0;
  out.used_least_squares = true;
  double lo = out.lo, hi = hi0;
  const double step = 1 + eps / 4;
  const int limit = static_cast<int>(std::ceil(std::log(std::sqrt(static_cast<double>(inst.n))) / std::log(step))) + 2;

  auto probe = [&](double g) {
    ++out.calls;
    SolverRun run;
    try {
      run = solve_with(normalize(inst, g), p, algo, backend);
    } catch (const SingularOracleError&) {
      // weights collapsed onto a rank-deficient row set: the guess is far too small
      lo = std::max(lo, g);
      return false;
    }
    Vec x = run.x_hat * g;
    const double res = residual_inf(inst, x);
    const bool accept = res <= (1 + 10 * eps) * g;
    if (accept) {
      hi = g;
      if (g < out.guess || (g == out.guess && res < out.residual)) {
        run.x_hat = x;
        out.run = std::move(run);
        out.guess = g;
        out.residual = res;
        out.used_least_squares = false;
      }
    } else {
      lo = std::max(lo, g);
    }
    return accept;
  };

  if (inst.scale_hint && *inst.scale_hint > lo && *inst.scale_hint < hi) probe(*inst.scale_hint);
  while (hi / lo > step && out.calls < limit) probe(std::sqrt(lo * hi));
  if (out.used_least_squares && out.calls > 0 && hi == hi0) out.run.status = RunStatus::ok;
  out.lo = lo;
  out.hi = hi;
  return out;
}

}  // namespace linf_mwu
