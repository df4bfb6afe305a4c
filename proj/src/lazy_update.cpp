#include "linf_mwu/lazy_update.hpp"

#include <algorithm>
#include <climits>
#include <cmath>

#include "linf_mwu/error.hpp"

namespace linf_mwu {

int ceil_log2(long n) {
  int l = 0;
  while ((1L << l) < n) ++l;
  return std::max(1, l);
}

SelectVector::SelectVector(int n, double delta, bool keep_log)
    : n_(n), delta_(delta), log_n_(ceil_log2(n)), keep_log_(keep_log), last_width_(n, LONG_MIN / 2) {
  if (n < 1) throw Error(ErrorCode::invalid_parameter, "SelectVector needs n >= 1");
  if (!(delta > 0)) throw Error(ErrorCode::invalid_parameter, "delta must be positive");
}

const std::vector<int>& SelectVector::select(const Vec& r, long i) {
  if (r.size() != n_) throw Error(ErrorCode::dimension_mismatch, "resistance length mismatch");
  if (i != last_i_ + 1) throw Error(ErrorCode::internal_consistency, "missing history snapshot");
  last_i_ = i;
  current_.clear();
  if (i == 0) {
    rbar_ = r;
    anchors_.assign(log_n_, r);
    current_.resize(n_);
    for (int e = 0; e < n_; ++e) current_[e] = e;
    if (keep_log_) log_.push_back(current_);
    return current_;
  }
  std::vector<char> in(n_, 0);
  const double thr = threshold();
  bool full = false;
  for (int l = 0; l <= log_n_; ++l) {
    const long step = 1L << l;
    if (i % step != 0) continue;
    if (l == log_n_) {
      full = true;
      continue;
    }
    const Vec& old = anchors_[l];
    for (int e = 0; e < n_; ++e) {
      if (in[e]) continue;
      if (std::abs(std::log(r(e) / old(e))) >= thr && last_width_[e] <= i - step) in[e] = 1;
    }
  }
  for (int l = 0; l < log_n_; ++l)
    if (i % (1L << l) == 0) anchors_[l] = r;
  for (int e = 0; e < n_; ++e) {
    if (full || in[e]) {
      current_.push_back(e);
      rbar_(e) = r(e);
    }
  }
  if (keep_log_) log_.push_back(current_);
  return current_;
}

void SelectVector::note_width_update(long i, const std::vector<int>& coords, const Vec& r) {
  for (int e : coords) {
    last_width_[e] = i;
    rbar_(e) = r(e);
  }
  if (keep_log_ && !log_.empty()) log_.back().insert(log_.back().end(), coords.begin(), coords.end());
}

BucketDecomposition::BucketDecomposition(double zeta_, long T_) : zeta(zeta_), T(std::max(1L, T_)) {
  if (!(zeta > 0)) throw Error(ErrorCode::invalid_parameter, "zeta must be positive");
  log_T = ceil_log2(T);
  buckets.assign(log_T + 1, {});
}

int BucketDecomposition::classify(double m) const {
  if (!(m >= 0)) throw Error(ErrorCode::invalid_parameter, "mass must be nonnegative");
  if (m > zeta) throw Error(ErrorCode::budget_exceeded, "per-iteration cubic mass exceeds zeta");
  if (m <= zeta / static_cast<double>(T)) return log_T;
  int j = 0;
  while (j < log_T && !(m > zeta / std::ldexp(1.0, j + 1))) ++j;
  return j;
}

int classify_iteration(const BucketDecomposition& decomp, double m) { return decomp.classify(m); }

SelectVectorL3::SelectVectorL3(int n, double delta, long T, double zeta, bool keep_log)
    : n_(n), delta_(delta), log_n_(ceil_log2(n)), keep_log_(keep_log), decomp_(zeta, T) {
  state_.resize(decomp_.log_T + 1);
  for (auto& s : state_) s.prefix = Vec::Zero(n);
}

double SelectVectorL3::threshold() const { return delta_ / (10.0 * log_n_ * log_n_); }

const std::vector<int>& SelectVectorL3::select(const Vec& r, long t) {
  if (r.size() != n_) throw Error(ErrorCode::dimension_mismatch, "resistance length mismatch");
  if (t != last_t_ + 1) throw Error(ErrorCode::internal_consistency, "missing history snapshot");
  last_t_ = t;
  current_.clear();
  if (t == 0) {
    rbar_ = r;
    prev_r_ = r;
    current_.resize(n_);
    for (int e = 0; e < n_; ++e) current_[e] = e;
    if (keep_log_) log_.push_back(current_);
    return current_;
  }
  if (((r.array() - prev_r_.array()) < -1e-15 * prev_r_.array()).any())
    throw Error(ErrorCode::contract_violation, "cubic-mass scheme requires nondecreasing resistances");
  Vec a = ((r.array() / prev_r_.array()) - 1.0).abs().matrix();
  double m = a.array().cube().sum();
  masses_.push_back(m);
  int j = decomp_.classify(m);
  decomp_.buckets[j].push_back(t - 1);
  BucketState& st = state_[j];
  st.count += 1;
  const long k = st.count;
  st.prefix += a;
  std::vector<char> in(n_, 0);
  const double thr = threshold();
  for (int l = 0; l <= decomp_.log_T; ++l) {
    const long step = 1L << l;
    if (k % step != 0) continue;
    const long start = k - step;  // window ranks start..k (rank 0 does not exist)
    Vec window = st.prefix;
    if (start - 1 >= 1) {
      auto it = st.saved.find(start - 1);
      if (it == st.saved.end()) throw Error(ErrorCode::internal_consistency, "missing bucket prefix snapshot");
      window -= it->second;
    }
    for (int e = 0; e < n_; ++e)
      if (!in[e] && window(e) >= thr) in[e] = 1;
  }
  st.saved[k] = st.prefix;
  // A snapshot at rank q serves windows starting at q+1 up to level v2(q+1).
  for (auto it = st.saved.begin(); it != st.saved.end();) {
    long q = it->first;
    long p = q + 1;
    long span = p & (-p);
    if (k > q + 1 + span) it = st.saved.erase(it);
    else ++it;
  }
  for (int e = 0; e < n_; ++e) {
    if (in[e]) {
      current_.push_back(e);
      rbar_(e) = r(e);
    }
  }
  prev_r_ = r;
  if (keep_log_) log_.push_back(current_);
  return current_;
}

void SelectVectorL3::note_width_update(long, const std::vector<int>& coords, const Vec& r) {
  for (int e : coords) rbar_(e) = r(e);
  if (keep_log_ && !log_.empty()) log_.back().insert(log_.back().end(), coords.begin(), coords.end());
}

}  // namespace linf_mwu
