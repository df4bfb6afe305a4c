#pragma once

#include <optional>
#include <vector>

#include "linf_mwu/problem.hpp"

namespace linf_mwu {

// M_new - M_old = U * core * V^T.
struct UpdateBatch {
  Mat U;
  Mat core;
  Mat V;
  std::vector<int> touched;

  int width() const { return static_cast<int>(U.cols()); }
  Mat reconstruct() const { return U * core * V.transpose(); }
};

struct OpCounts {
  long resets = 0;
  long partial_resets = 0;
  long queries = 0;
  double reset_ops = 0;
  double partial_reset_ops = 0;
  double query_ops = 0;

  OpCounts& operator+=(const OpCounts& o);
  nlohmann::json to_json() const;
};

enum class MaintainerKind { one_level, two_level, implicit };

class InverseMaintainer {
 public:
  // `v` is required for the implicit kind; the accumulated sum then starts at M0^{-1} v.
  InverseMaintainer(MaintainerKind kind, const Mat& M0, std::optional<Vec> v = std::nullopt,
                    bool accumulate_initial = true);

  MaintainerKind kind() const { return kind_; }
  int dim() const { return n_; }

  // Implicit kind: also adds the new inverse times v to the running sum.
  void update(const UpdateBatch& batch);
  void update_no_accumulate(const UpdateBatch& batch);
  void accumulate();

  void reset();
  void partial_reset();

  Mat query(const std::vector<int>& rows, const std::vector<int>& cols);
  Mat query_all();
  Vec query_sum() const;

  int k0() const { return k0_; }
  int k1() const { return k1_; }
  long t() const { return t_; }
  long t0() const { return t0_; }
  long t1() const { return t1_; }
  bool degraded() const { return degraded_; }
  const Mat& snapshot_inverse() const { return N_; }
  const Mat& B() const { return B_; }
  const std::vector<int>& J() const { return J_; }
  const OpCounts& op_counts() const { return counts_; }

  // Test hook: corrupts every subsequent reset so oracle equivalence must fail.
  void set_fault_inject(bool on) { fault_inject_ = on; }

 private:
  void check_batch(const UpdateBatch& batch) const;
  void full_reinvert();
  Mat current_matrix() const;
  // Pieces of (M^{t1})^{-1} = N - F E applied to pending level-2 factors.
  bool inner_level2(Mat& PU1, Mat& G1) const;

  MaintainerKind kind_;
  int n_;
  Mat M_t0_;  // snapshot used only by the degraded fallback
  Mat N_;

  // level one: committed at t1, accumulated since t0
  Mat U0_, C0_, V0_, F_, B_, E_;
  std::vector<int> J_;

  // level two: pending since t1
  Mat U1_, C1_, V1_;
  std::vector<int> J1_;

  int k0_ = 0;
  int k1_ = 0;
  long t_ = 0;
  long t0_ = 0;
  long t1_ = 0;
  bool degraded_ = false;
  bool fault_inject_ = false;

  std::optional<Vec> v_;
  Vec Nv_;
  Vec u0_, u1_, u2_;

  OpCounts counts_;
};

}  // namespace linf_mwu
