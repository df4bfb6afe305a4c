#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "linf_mwu/error.hpp"
#include "linf_mwu/rng.hpp"
#include "linf_mwu/sketching.hpp"

using namespace linf_mwu;

namespace {

Vec gaussian_vec(std::mt19937_64& gen, int n) {
  std::normal_distribution<double> nd;
  Vec x(n);
  for (int e = 0; e < n; ++e) x(e) = nd(gen);
  return x;
}

}  // namespace

TEST_CASE("embedding columns have unit norm") {
  for (int b : {1, 7, 64}) {
    CweSketch S(b, 130, 5);
    Mat D = S.dense();
    CHECK(((D.transpose() * D).diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(S.apply_roundtrip(Vec::Unit(130, 0))(0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("embedding apply matches the dense matrix and is deterministic") {
  std::mt19937_64 gen(1);
  Vec x = gaussian_vec(gen, 70);
  CweSketch S(12, 70, 99), T(12, 70, 99), U(12, 70, 100);
  Mat D = S.dense();
  CHECK((S.apply(x) - D * x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((S.apply_roundtrip(x) - D.transpose() * (D * x)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(S.apply_roundtrip(x) == T.apply_roundtrip(x));
  CHECK(S.apply_roundtrip(x) != U.apply_roundtrip(x));
  CHECK_THROWS_AS(S.apply(Vec::Ones(3)), Error);
}

TEST_CASE("embedding roundtrip is unbiased with bounded variance and symmetric") {
  const int n = 32, b = 16, trials = 10000;
  std::mt19937_64 gen(2);
  Vec x = gaussian_vec(gen, n);
  const int e = 5;
  double sum = 0, sq = 0, cube = 0;
  std::vector<double> dev(trials);
  for (int t = 0; t < trials; ++t) {
    CweSketch S(b, n, child_seed(7, 0, t));
    dev[t] = S.apply_roundtrip(x)(e) - x(e);
    sum += dev[t];
  }
  const double mean = sum / trials;
  for (double d : dev) {
    sq += (d - mean) * (d - mean);
    cube += std::pow(d - mean, 3);
  }
  const double var = sq / (trials - 1);
  const double stderr_ = std::sqrt(var / trials);
  CHECK(std::abs(mean) <= 4 * stderr_);
  CHECK(var <= 2.0 * x.squaredNorm() / b);
  const double skew = (cube / trials) / std::pow(var, 1.5);
  CHECK(std::abs(skew) <= 0.1);
}

TEST_CASE("embedding inner products concentrate") {
  const int n = 64, b = 32, trials = 10000;
  const double C2 = std::ceil(std::log(n));
  std::mt19937_64 gen(3);
  int fails = 0;
  for (int t = 0; t < trials; ++t) {
    Vec g = gaussian_vec(gen, n).normalized(), h = gaussian_vec(gen, n).normalized();
    CweSketch S(b, n, child_seed(8, 0, t));
    const double est = S.apply(g).dot(S.apply(h));
    if (std::abs(est - g.dot(h)) > C2 / std::sqrt(b)) ++fails;
  }
  CHECK(fails <= trials / 100);
}

TEST_CASE("norm sketch") {
  JlSketch J(jl_rows(0.2, 100, 0.01), 100, 4);
  CHECK(J.norm(Vec::Zero(100)) == 0.0);
  std::mt19937_64 gen(4);
  Vec x = gaussian_vec(gen, 100);
  CHECK(jl_norm(J, 2 * x) == doctest::Approx(2 * jl_norm(J, x)).epsilon(1e-14));
  int ok = 0;
  for (int t = 0; t < 1000; ++t) {
    JlSketch S(jl_rows(0.2, 100, 0.01), 100, child_seed(9, 0, t));
    const double v = S.norm(Vec::Unit(100, 0));
    if (v >= 0.8 && v <= 1.2) ++ok;
  }
  CHECK(ok >= 990);
  CHECK_THROWS_AS(J.norm(Vec::Ones(5)), Error);
  CHECK_THROWS_AS(jl_rows(0, 10, 0.1), Error);
}

TEST_CASE("cubic norm estimator") {
  const int n = 64;
  const double C3 = calibrate_c3(n, 11, 300);
  MESSAGE("calibrated C3 = " << C3);
  CHECK(C3 >= 1.0);
  int inside = 0;
  for (int t = 0; t < 1000; ++t) {
    L3Sketch sk(n, child_seed(12, 0, t));
    const double v = l3_estimate(sk, Vec::Unit(n, 3));
    if (v >= std::cbrt(1.0 / C3) && v <= std::cbrt(C3)) ++inside;
  }
  CHECK(inside >= 950);
  L3Sketch sk(n, 13);
  CHECK(sk.estimate(Vec::Zero(n)) == 0.0);
  std::mt19937_64 gen(14);
  Vec x = gaussian_vec(gen, n);
  CHECK(sk.estimate(3.0 * x) == doctest::Approx(3.0 * sk.estimate(x)).epsilon(1e-14));
  CHECK(sk.estimate(x) == sk.estimate(x));
}

TEST_CASE("heavy hitters") {
  const int n = 100;
  const double fail = 0.01;
  std::mt19937_64 gen(15);
  std::normal_distribution<double> nd;
  int found = 0;
  for (int t = 0; t < 1000; ++t) {
    HeavyHitterSketch hh(n, 0.5, fail, child_seed(16, 0, t));
    Vec x(n);
    for (int e = 0; e < n; ++e) x(e) = 0.1 * nd(gen);
    x(3) += 10;
    auto L = hh_decode(hh, hh.sketch(x));
    CHECK(static_cast<int>(L.size()) <= hh.cap());
    if (std::find(L.begin(), L.end(), 3) != L.end()) ++found;
  }
  CHECK(found >= 1000 * (1 - fail));

  HeavyHitterSketch hh(n, 0.5, fail, 17);
  CHECK(static_cast<int>(hh.decode(hh.sketch(Vec::Zero(n))).size()) <= hh.cap());
  CHECK_THROWS_AS(hh.decode(Vec::Ones(3)), Error);
  CHECK_THROWS_AS(HeavyHitterSketch(n, 0.0, fail, 1), Error);
}

TEST_CASE("embedding errors accumulate like a martingale") {
  // For one coordinate, the summed error over T fresh sketches stays within
  // 10 (C1 + C2) log n sqrt(n T / (b eps)) when ||u||^2 <= n / eps.
  const int n = 64, b = 16, T = 32;
  const double eps = 0.1, C1 = 1, C2 = std::ceil(std::log(n));
  std::mt19937_64 gen(18);
  Vec u = gaussian_vec(gen, n);
  u *= std::sqrt(n / eps) / u.norm();
  const double bound = 10 * (C1 + C2) * std::log(n) * std::sqrt(n * T / (b * eps));
  int ok = 0;
  for (int rep = 0; rep < 200; ++rep) {
    double s = 0;
    for (int i = 0; i < T; ++i) {
      CweSketch S(b, n, child_seed(19, rep, i));
      s += S.apply_roundtrip(u)(0) - u(0);
    }
    if (std::abs(s) <= bound) ++ok;
  }
  CHECK(ok >= 198);
}
