#pragma once

#include <map>
#include <vector>

#include "linf_mwu/problem.hpp"

namespace linf_mwu {

// ceil(log2(n)), at least 1.
int ceil_log2(long n);

// Dyadic-level lazy maintenance of rbar ~_delta r.
class SelectVector {
 public:
  SelectVector(int n, double delta, bool keep_log = true);

  // Must be called with consecutive counters starting at 0. Returns the update set.
  const std::vector<int>& select(const Vec& r, long i);

  // Width steps sync rbar exactly on the touched coordinates and stamp LastWidth.
  void note_width_update(long i, const std::vector<int>& coords, const Vec& r);

  const Vec& rbar() const { return rbar_; }
  double delta() const { return delta_; }
  int log_n() const { return log_n_; }
  double threshold() const { return delta_ / (2.0 * log_n_); }
  long last_width(int e) const { return last_width_[e]; }
  // Per-call update sets (selection plus width syncs logged at that counter).
  const std::vector<std::vector<int>>& update_log() const { return log_; }

 private:
  int n_;
  double delta_;
  int log_n_;
  bool keep_log_;
  long last_i_ = -1;
  Vec rbar_;
  std::vector<Vec> anchors_;  // anchors_[l] = r at the last counter divisible by 2^l
  std::vector<long> last_width_;
  std::vector<int> current_;
  std::vector<std::vector<int>> log_;
};

// B_j holds transitions with zeta/2^{j+1} < m <= zeta/2^j; the last bucket holds m <= zeta/T.
struct BucketDecomposition {
  double zeta = 1;
  long T = 1;
  int log_T = 1;
  std::vector<std::vector<long>> buckets;

  BucketDecomposition() = default;
  BucketDecomposition(double zeta, long T);
  int classify(double m) const;
};

int classify_iteration(const BucketDecomposition& decomp, double m);

// Lazy maintenance driven by per-transition cubic mass; monotone weights only.
class SelectVectorL3 {
 public:
  SelectVectorL3(int n, double delta, long T, double zeta, bool keep_log = true);

  const std::vector<int>& select(const Vec& r, long t);
  void note_width_update(long t, const std::vector<int>& coords, const Vec& r);

  const Vec& rbar() const { return rbar_; }
  const BucketDecomposition& decomposition() const { return decomp_; }
  double threshold() const;
  const std::vector<std::vector<int>>& update_log() const { return log_; }
  // Cubic mass sum_e |r'/r - 1|^3 of every processed transition.
  const std::vector<double>& masses() const { return masses_; }

 private:
  struct BucketState {
    long count = 0;
    Vec prefix;
    std::map<long, Vec> saved;  // prefix snapshots keyed by rank
  };

  int n_;
  double delta_;
  int log_n_;
  bool keep_log_;
  long last_t_ = -1;
  Vec rbar_;
  Vec prev_r_;
  BucketDecomposition decomp_;
  std::vector<BucketState> state_;
  std::vector<int> current_;
  std::vector<std::vector<int>> log_;
  std::vector<double> masses_;
};

}  // namespace linf_mwu
