#pragma once

#include <utility>
#include <vector>

#include "linf_mwu/inverse_maintenance.hpp"
#include "linf_mwu/problem.hpp"

namespace linf_mwu {

struct OracleConfig {
  double ridge_floor = 1e-12;
  double tol = 1e-8;
};

struct OracleResult {
  Vec delta;
  Vec residual_u;  // C_tilde * delta - d_tilde
  double psi = 0;  // sum_e rbar_e u_e^2
  double ridge = 0;
};

// Weighted least squares: argmin_delta sum_e rbar_e (C delta - d)_e^2.
OracleResult solve_direct(const RowMat& C, const Vec& d, const Vec& rbar, const OracleConfig& cfg = {});

double psi_of(const Vec& rbar, const Vec& u);

// ||C^T Rbar u||_inf relative to ||C^T Rbar d||_inf.
double normal_equation_residual(const RowMat& C, const Vec& d, const Vec& rbar, const OracleResult& res);

struct MaintainedConfig {
  MaintainerKind kind = MaintainerKind::one_level;
  double a0 = 0.75;
  double a1 = 0.5;
  bool fault_inject = false;
};

struct PartialResult {
  Vec delta;
  std::vector<int> rows;
  Vec residual_rows;  // residual entries for `rows`, in order
};

// Oracle backed by an inverse maintainer over the augmented matrix
//   [[C^T Rbar C + lambda I, -C^T Rbar d], [0, 1]]
// whose last column holds [delta; 1]. Changing rbar_e is the rank-one update
// rbar_change * [c_e; 0] [c_e; -d_e]^T.
class MaintainedOracle {
 public:
  MaintainedOracle(const RowMat& C, const Vec& d, const Vec& rbar0, const MaintainedConfig& mcfg,
                   const OracleConfig& cfg = {});

  PartialResult solve(const std::vector<std::pair<int, double>>& rbar_delta,
                      const std::vector<int>& query_rows);

  // Full residual and psi; equivalent to solve_direct on the current rbar.
  OracleResult solve_full(const std::vector<std::pair<int, double>>& rbar_delta);

  // Adds the current delta to the implicit running sum (implicit kind only).
  void accumulate_step();
  // Sum of accumulated deltas and how many were accumulated.
  std::pair<Vec, double> accumulated() const;

  const Vec& rbar() const { return rbar_; }
  double ridge() const { return ridge_; }
  const OpCounts& op_counts() const { return im_.op_counts(); }
  bool degraded() const { return im_.degraded(); }
  const InverseMaintainer& maintainer() const { return im_; }
  long calls() const { return calls_; }
  // Changed coordinates since the last reset / partial reset; these drive the thresholds.
  long pending_rank() const { return logical_k0_; }
  long pending_rank_inner() const { return logical_k1_; }

 private:
  void apply(const std::vector<std::pair<int, double>>& rbar_delta);

  const RowMat& C_;
  const Vec& d_;
  Vec rbar_;
  MaintainedConfig mcfg_;
  double ridge_ = 0;
  int dim_ = 0;
  double k0_threshold_ = 0;
  double k1_threshold_ = 0;
  InverseMaintainer im_;
  long calls_ = 0;
  long logical_k0_ = 0;
  long logical_k1_ = 0;
};

}  // namespace linf_mwu
