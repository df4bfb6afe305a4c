#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "linf_mwu/inverse_maintenance.hpp"
#include "linf_mwu/l2_oracle.hpp"
#include "linf_mwu/potentials.hpp"
#include "linf_mwu/problem.hpp"

namespace linf_mwu {

enum class Algo { monotone, stable, robust, opt, baseline };
enum class Backend { direct, one_level, two_level };
enum class LazyScheme { dyadic, cubic };
enum class RunStatus { ok, iter_cap, width_cap, psi0_clamped, degraded_woodbury, statistical_failure, search_failure };

const char* to_string(Algo a);
const char* to_string(Backend b);
const char* to_string(LazyScheme s);
const char* to_string(RunStatus s);
Algo parse_algo(const std::string& s);
Backend parse_backend(const std::string& s);
LazyScheme parse_lazy_scheme(const std::string& s);

// Unset optionals are computed from the schedule formulas (constants 1, log = ln max(n, 3)).
struct SolverParams {
  double epsilon = 0.1;
  std::optional<double> delta;
  std::optional<double> eta;
  std::optional<double> alpha;
  std::optional<double> tau;
  std::optional<double> rho;
  std::optional<double> T;
  std::optional<double> b;
  std::optional<int> c_rho;
  std::optional<long> max_iters;
  std::uint64_t seed = 0;

  bool exact_l3 = true;
  bool jl_psi = false;
  bool refresh_hh = false;
  bool fault_inject = false;
  double a0 = 0.75;
  double a1 = 0.5;
  LazyScheme lazy = LazyScheme::dyadic;
  std::optional<double> zeta;

  // Stop once the running average reaches this residual on the solver's instance (0 = off).
  double stop_residual = 0;
  bool record_trace = true;
  bool keep_update_log = false;
};

struct ResolvedParams {
  int n = 0;  // original row count
  double epsilon = 0;
  double delta = 0;
  double eta = 0;
  double alpha = 0;
  double alpha_plus = 0;
  double alpha_minus = 0;
  double tau = 0;
  double rho = 0;
  double T = 0;
  long T_int = 0;
  double b = 0;
  int c_rho = 0;
  long max_iters = 0;
  double width_cap = 0;
  double psi0 = 0;
  bool psi0_clamped = false;
  double log_n = 0;
  double log_psi = 0;  // ln(n / psi0)
  double c3 = 1;
  double zeta = 0;

  nlohmann::json to_json() const;
};

ResolvedParams resolve_params(Algo algo, int n, double psi0, const SolverParams& p);

struct StabilityReport {
  double l3_primal_mass = 0;  // sum over primal steps of sum_{e in S_i} ((r'-r)/r)^3
  double l3_primal_total = 0; // same sum over all coordinates
  double l3_width_mass = 0;   // same sum over width steps, all coordinates
  double max_l2_step = 0;     // max over primal steps of sum_e ln^2(r'/r)
  double max_fake_l2_step = 0;
  double max_fake_drift = 0;  // max_e, windows |sum ln(rtilde / r)|
  double min_fake_ratio = 1;  // smallest rtilde / r seen

  nlohmann::json to_json() const;
};

// Worst ratios are (observed side) / (bound side); <= 1 means the bound held.
struct InvariantReport {
  long checks = 0;
  double max_log_ratio = 0;      // max_e |ln(rbar_e / r_e)| at oracle calls
  double worst_sandwich = 0;     // Psi(rbar) / (e^{eps+delta} Phi)
  double worst_phi_growth = 0;   // Phi / growth bound
  double worst_psi_growth = 0;   // growth bound / Psi(rbar), monotone only
  double worst_psi_lower = 0;    // (e^{-delta} Psi(r0) / (1+2 eps)) / Psi(rbar), non-monotone only
  double min_weight = 0;
  bool weights_monotone = true;
  long max_width_set = 0;
  double worst_width_set = 0;    // |H| / (2n e^{eps+2 delta} / (tau eps) + 1)
  long zeta_fallbacks = 0;
  double averaging_error = 0;    // implicit sum vs explicit sum of deltas, relative

  nlohmann::json to_json() const;
};

struct SolverRun {
  Vec x_hat;
  long primal_steps = 0;
  long width_steps = 0;
  RunStatus status = RunStatus::ok;
  double residual = 0;  // ||C x_hat - target||_inf on the instance handed to the solver
  ResolvedParams params;
  PotentialTrace trace;
  StabilityReport stability;
  InvariantReport invariants;
  OpCounts op_counts;
  bool degraded = false;
  std::vector<double> l2_steps;
  std::vector<double> fake_l2_steps;
  std::vector<std::vector<int>> update_log;

  long iterations() const { return primal_steps + width_steps; }
};

SolverRun solve_monotone(const Instance& inst, const SolverParams& p, Backend backend = Backend::direct);
SolverRun solve_nonmonotone_stable(const DoubledInstance& dbl, const SolverParams& p,
                                   Backend backend = Backend::direct);
SolverRun solve_nonmonotone_robust(const DoubledInstance& dbl, const SolverParams& p,
                                   Backend backend = Backend::direct);
SolverRun solve_nonmonotone_opt(const DoubledInstance& dbl, const SolverParams& p);
// Primal-only monotone MWU without width reduction.
SolverRun solve_baseline(const Instance& inst, const SolverParams& p);

// Dispatches to the chosen solver, doubling the instance where needed.
SolverRun solve_with(const Instance& inst, const SolverParams& p, Algo algo, Backend backend);

struct WidthChoice {
  std::vector<int> coords;
  long s_size = 0;
  long h_size = 0;
  bool extra = false;  // H != S, one coordinate outside the budget was added
  std::optional<double> zeta_star;
  bool fallback = false;  // no scale reached the cubic-mass threshold
};

// Width-set selection shared by the non-monotone solvers. `candidates` restricts S when given.
WidthChoice select_width_set(const Vec& u, const Vec& rbar, double psi, double tau, double rho,
                             double s_threshold, int n, double eps, int c_rho,
                             const std::vector<int>* candidates = nullptr);

// Partial weight for the single coordinate added past the width budget: min(1, psi / (tau r_e)).
double width_gamma(double r_e, double psi, double tau);

struct AutoRun {
  SolverRun run;        // the accepted inner run (unnormalized x_hat)
  double guess = 0;     // accepted scale
  double residual = 0;  // unnormalized residual
  int calls = 0;
  double lo = 0;
  double hi = 0;
  bool used_least_squares = false;
};

// Outer geometric search over the optimum scale.
AutoRun solve_auto(const Instance& inst, const SolverParams& p, Algo algo, Backend backend);

}  // namespace linf_mwu
