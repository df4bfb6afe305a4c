#pragma once

#include <cstdint>
#include <vector>

#include "linf_mwu/problem.hpp"

namespace linf_mwu {

// b x n matrix with i.i.d. entries +-1/sqrt(b). Signs are packed one byte per
// (group of 8 rows, column); bit t of byte (g, e) marks entry (8g + t, e) negative.
class CweSketch {
 public:
  CweSketch(int b, int n, std::uint64_t seed);

  int rows() const { return b_; }
  int cols() const { return n_; }
  std::uint64_t seed() const { return seed_; }

  Vec apply(const Vec& x) const;
  // S^T S x
  Vec apply_roundtrip(const Vec& x) const;
  Mat dense() const;

 private:
  bool negative(int j, int e) const {
    return (bytes_[static_cast<std::size_t>(j >> 3) * n_ + e] >> (j & 7)) & 1;
  }

  int b_;
  int n_;
  std::uint64_t seed_;
  int groups_;
  std::vector<unsigned char> bytes_;
};

int jl_rows(double eps, double m, double fail, double c = 8.0);

// Gaussian JL map with N(0, 1/k) entries.
class JlSketch {
 public:
  JlSketch(int k, int n, std::uint64_t seed);

  int rows() const { return static_cast<int>(J_.rows()); }
  int cols() const { return static_cast<int>(J_.cols()); }
  Vec apply(const Vec& x) const;
  double norm(const Vec& x) const;

 private:
  Mat J_;
};

double jl_norm(const JlSketch& sk, const Vec& x);

// Max-stability l3 estimator: each repetition hashes Exp(1)^{-1/3}-scaled, signed
// coordinates into buckets and reads the largest bucket magnitude.
class L3Sketch {
 public:
  L3Sketch(int n, std::uint64_t seed, double c3 = 1.0, int repetitions = 0);

  int cols() const { return n_; }
  int rows() const { return buckets_; }
  int repetitions() const { return reps_; }
  double estimate(const Vec& x) const;

 private:
  int n_;
  int buckets_;
  int reps_;
  std::vector<int> bucket_;  // reps x n
  std::vector<double> scale_;  // signed Exp^{-1/3} factors, reps x n
};

double l3_estimate(const L3Sketch& sk, const Vec& x);

// Smallest C3 >= 1 with estimate/||x||_3 in [C3^{-1/3}, C3^{1/3}] on `trials` fresh sketches
// of random Gaussian inputs, at the given coverage quantile.
double calibrate_c3(int n, std::uint64_t seed, int trials, double coverage = 0.99);

// Count-sketch: `reps` hash rows of `buckets` signed counters.
class HeavyHitterSketch {
 public:
  HeavyHitterSketch(int n, double eps_heavy, double fail, std::uint64_t seed, int cap = 0);

  int cols() const { return n_; }
  int reps() const { return reps_; }
  int buckets() const { return buckets_; }
  int cap() const { return cap_; }
  double eps_heavy() const { return eps_; }

  Vec sketch(const Vec& x) const;
  // Candidate indices, strongest estimates first, at most cap() of them.
  std::vector<int> decode(const Vec& y) const;

 private:
  int n_;
  double eps_;
  int reps_;
  int buckets_;
  int cap_;
  std::vector<int> bucket_;
  std::vector<signed char> sign_;
};

std::vector<int> hh_decode(const HeavyHitterSketch& sk, const Vec& y);

}  // namespace linf_mwu
