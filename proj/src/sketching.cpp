#include "linf_mwu/sketching.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "linf_mwu/error.hpp"
#include "linf_mwu/rng.hpp"

namespace linf_mwu {

namespace {

void check_dim(const Vec& x, int n) {
  if (x.size() != n) throw Error(ErrorCode::dimension_mismatch, "sketch input has wrong length");
}

double median(std::vector<double> v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + m);
  return 0.5 * (lo + hi);
}

}  // namespace

namespace {

struct SignTable {
  alignas(64) double bit[256][8];
  SignTable() {
    for (int c = 0; c < 256; ++c)
      for (int t = 0; t < 8; ++t) bit[c][t] = (c >> t) & 1;
  }
};

const SignTable& sign_table() {
  static const SignTable table;
  return table;
}

}  // namespace

CweSketch::CweSketch(int b, int n, std::uint64_t seed) : b_(b), n_(n), seed_(seed) {
  if (b < 1 || n < 1) throw Error(ErrorCode::invalid_parameter, "sketch dimensions must be positive");
  groups_ = (b + 7) / 8;
  bytes_.resize(static_cast<std::size_t>(groups_) * n);
  std::uint64_t state = seed;
  std::uint64_t z = 0;
  for (std::size_t i = 0; i < bytes_.size(); ++i) {
    if (i % 8 == 0) {
      state += 0x9e3779b97f4a7c15ULL;
      z = mix_seed(state);
    }
    bytes_[i] = static_cast<unsigned char>(z >> (8 * (i % 8)));
  }
  if (b % 8 != 0) {
    const unsigned char mask = static_cast<unsigned char>((1u << (b % 8)) - 1);
    for (int e = 0; e < n; ++e) bytes_[static_cast<std::size_t>(groups_ - 1) * n + e] &= mask;
  }
}

Vec CweSketch::apply(const Vec& x) const {
  check_dim(x, n_);
  const double total = x.sum();
  const double s = 1.0 / std::sqrt(static_cast<double>(b_));
  const SignTable& tab = sign_table();
  Vec y(b_);
  for (int g = 0; g < groups_; ++g) {
    double neg[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    const unsigned char* row = &bytes_[static_cast<std::size_t>(g) * n_];
    for (int e = 0; e < n_; ++e) {
      const double* p = tab.bit[row[e]];
      const double xe = x(e);
      for (int t = 0; t < 8; ++t) neg[t] += xe * p[t];
    }
    for (int t = 0; t < 8 && 8 * g + t < b_; ++t) y(8 * g + t) = s * (total - 2.0 * neg[t]);
  }
  return y;
}

Vec CweSketch::apply_roundtrip(const Vec& x) const {
  Vec y = apply(x);
  const double s = 1.0 / std::sqrt(static_cast<double>(b_));
  // out_e = s * (sum_j y_j - 2 * sum_{j: negative} y_j), the inner sum read from subset-sum tables
  Vec neg = Vec::Zero(n_);
  double sums[256];
  for (int g = 0; g < groups_; ++g) {
    double part[8];
    for (int t = 0; t < 8; ++t) part[t] = 8 * g + t < b_ ? y(8 * g + t) : 0.0;
    sums[0] = 0;
    for (int c = 1; c < 256; ++c) sums[c] = sums[c & (c - 1)] + part[std::countr_zero(static_cast<unsigned>(c))];
    const unsigned char* row = &bytes_[static_cast<std::size_t>(g) * n_];
    for (int e = 0; e < n_; ++e) neg(e) += sums[row[e]];
  }
  return (s * (y.sum() - 2.0 * neg.array())).matrix();
}

Mat CweSketch::dense() const {
  Mat S(b_, n_);
  const double s = 1.0 / std::sqrt(static_cast<double>(b_));
  for (int j = 0; j < b_; ++j)
    for (int e = 0; e < n_; ++e) S(j, e) = negative(j, e) ? -s : s;
  return S;
}

int jl_rows(double eps, double m, double fail, double c) {
  if (!(eps > 0) || !(fail > 0) || !(m >= 1)) throw Error(ErrorCode::invalid_parameter, "bad JL parameters");
  return std::max(1, static_cast<int>(std::ceil(c * std::log(m / fail) / (eps * eps))));
}

JlSketch::JlSketch(int k, int n, std::uint64_t seed) {
  if (k < 1 || n < 1) throw Error(ErrorCode::invalid_parameter, "sketch dimensions must be positive");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(k)));
  J_.resize(k, n);
  for (int j = 0; j < k; ++j)
    for (int e = 0; e < n; ++e) J_(j, e) = nd(gen);
}

Vec JlSketch::apply(const Vec& x) const {
  check_dim(x, cols());
  return J_ * x;
}

double JlSketch::norm(const Vec& x) const { return apply(x).norm(); }

double jl_norm(const JlSketch& sk, const Vec& x) { return sk.norm(x); }

L3Sketch::L3Sketch(int n, std::uint64_t seed, double c3, int repetitions) : n_(n) {
  if (n < 1) throw Error(ErrorCode::invalid_parameter, "sketch dimensions must be positive");
  const double ln = std::log(std::max(3.0, static_cast<double>(n)));
  buckets_ = std::max(1, static_cast<int>(std::ceil(c3 * std::cbrt(static_cast<double>(n)) * ln * ln * ln)));
  reps_ = repetitions > 0 ? repetitions : 2 * static_cast<int>(std::ceil(ln)) + 1;
  std::mt19937_64 gen(seed);
  std::exponential_distribution<double> ex(1.0);
  std::uniform_int_distribution<int> pick(0, buckets_ - 1);
  bucket_.resize(static_cast<std::size_t>(reps_) * n);
  scale_.resize(static_cast<std::size_t>(reps_) * n);
  for (std::size_t i = 0; i < bucket_.size(); ++i) {
    bucket_[i] = pick(gen);
    double sgn = (gen() & 1ULL) ? -1.0 : 1.0;
    scale_[i] = sgn / std::cbrt(ex(gen));
  }
}

double L3Sketch::estimate(const Vec& x) const {
  check_dim(x, n_);
  static const double kNorm = std::cbrt(std::log(2.0));
  std::vector<double> est(reps_);
  std::vector<double> acc(buckets_);
  for (int r = 0; r < reps_; ++r) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const std::size_t off = static_cast<std::size_t>(r) * n_;
    for (int e = 0; e < n_; ++e) acc[bucket_[off + e]] += scale_[off + e] * x(e);
    double m = 0;
    for (double a : acc) m = std::max(m, std::abs(a));
    est[r] = m;
  }
  return kNorm * median(est);
}

double l3_estimate(const L3Sketch& sk, const Vec& x) { return sk.estimate(x); }

double calibrate_c3(int n, std::uint64_t seed, int trials, double coverage) {
  std::vector<double> worst(trials);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  for (int t = 0; t < trials; ++t) {
    Vec x(n);
    for (int e = 0; e < n; ++e) x(e) = nd(gen);
    L3Sketch sk(n, child_seed(seed, 3, t));
    double ratio = sk.estimate(x) / std::cbrt(x.cwiseAbs().array().cube().sum());
    worst[t] = std::pow(std::max(ratio, 1.0 / ratio), 3.0);
  }
  std::sort(worst.begin(), worst.end());
  int idx = std::min(trials - 1, static_cast<int>(std::ceil(coverage * trials)) - 1);
  return std::max(1.0, worst[std::max(0, idx)]);
}

HeavyHitterSketch::HeavyHitterSketch(int n, double eps_heavy, double fail, std::uint64_t seed, int cap)
    : n_(n), eps_(eps_heavy) {
  if (n < 1) throw Error(ErrorCode::invalid_parameter, "sketch dimensions must be positive");
  if (!(eps_heavy > 0 && eps_heavy <= 1)) throw Error(ErrorCode::invalid_parameter, "eps_heavy must be in (0, 1]");
  if (!(fail > 0 && fail < 1)) throw Error(ErrorCode::invalid_parameter, "failure probability must be in (0, 1)");
  buckets_ = std::max(2, static_cast<int>(std::ceil(8.0 / (eps_heavy * eps_heavy))));
  const double ln = std::log(std::max(3.0, static_cast<double>(n)));
  reps_ = 2 * static_cast<int>(std::ceil(std::log(1.0 / fail) + ln)) + 1;
  cap_ = cap > 0 ? cap : static_cast<int>(std::ceil(8.0 / (eps_heavy * eps_heavy)));
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> pick(0, buckets_ - 1);
  bucket_.resize(static_cast<std::size_t>(reps_) * n);
  sign_.resize(bucket_.size());
  for (std::size_t i = 0; i < bucket_.size(); ++i) {
    bucket_[i] = pick(gen);
    sign_[i] = (gen() & 1ULL) ? -1 : 1;
  }
}

Vec HeavyHitterSketch::sketch(const Vec& x) const {
  check_dim(x, n_);
  Vec y = Vec::Zero(static_cast<Eigen::Index>(reps_) * buckets_);
  for (int r = 0; r < reps_; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * n_;
    for (int e = 0; e < n_; ++e) y(r * buckets_ + bucket_[off + e]) += sign_[off + e] * x(e);
  }
  return y;
}

std::vector<int> HeavyHitterSketch::decode(const Vec& y) const {
  if (y.size() != static_cast<Eigen::Index>(reps_) * buckets_ || !y.allFinite())
    throw Error(ErrorCode::dimension_mismatch, "malformed heavy-hitter sketch");
  std::vector<double> norms(reps_);
  for (int r = 0; r < reps_; ++r) norms[r] = y.segment(r * buckets_, buckets_).norm();
  const double norm = median(norms);
  const double thr = 0.5 * eps_ * norm;
  std::vector<std::pair<double, int>> hits;
  std::vector<double> vals(reps_);
  for (int e = 0; e < n_; ++e) {
    for (int r = 0; r < reps_; ++r) {
      const std::size_t i = static_cast<std::size_t>(r) * n_ + e;
      vals[r] = sign_[i] * y(r * buckets_ + bucket_[i]);
    }
    double est = std::abs(median(vals));
    if (est >= thr && est > 0) hits.emplace_back(est, e);
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (static_cast<int>(hits.size()) > cap_) hits.resize(cap_);
  std::vector<int> out;
  out.reserve(hits.size());
  for (auto& h : hits) out.push_back(h.second);
  return out;
}

std::vector<int> hh_decode(const HeavyHitterSketch& sk, const Vec& y) { return sk.decode(y); }

}  // namespace linf_mwu
