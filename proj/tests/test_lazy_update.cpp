#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <climits>
#include <cmath>
#include <random>

#include "linf_mwu/error.hpp"
#include "linf_mwu/lazy_update.hpp"

using namespace linf_mwu;

namespace {

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<int> all_of(int n) {
  std::vector<int> v(n);
  for (int e = 0; e < n; ++e) v[e] = e;
  return v;
}

// Full-history replay of the dyadic rule with width stamps.
struct DyadicReplay {
  int n;
  double delta;
  int log_n;
  std::vector<Vec> history;
  std::vector<long> last_width;
  Vec rbar;

  DyadicReplay(int n_, double delta_) : n(n_), delta(delta_), log_n(ceil_log2(n_)), last_width(n_, LONG_MIN / 2) {}

  std::vector<int> select(const Vec& r) {
    const long i = static_cast<long>(history.size());
    history.push_back(r);
    if (i == 0) {
      rbar = r;
      return all_of(n);
    }
    std::vector<int> out;
    for (int e = 0; e < n; ++e) {
      bool take = false;
      for (int l = 0; l <= log_n && !take; ++l) {
        const long step = 1L << l;
        if (i % step) continue;
        if (l == log_n) take = true;
        else if (std::abs(std::log(r(e) / history[i - step](e))) >= delta / (2.0 * log_n) && last_width[e] <= i - step)
          take = true;
      }
      if (take) {
        out.push_back(e);
        rbar(e) = r(e);
      }
    }
    return out;
  }

  void width(const std::vector<int>& coords, const Vec& r) {
    for (int e : coords) {
      last_width[e] = static_cast<long>(history.size()) - 1;
      rbar(e) = r(e);
    }
  }
};

}  // namespace

TEST_CASE("first call copies everything") {
  Vec r(3);
  r << 1, 2, 3;
  SelectVector sv(3, 0.05);
  CHECK(sv.select(r, 0) == all_of(3));
  CHECK(sv.rbar() == r);
}

TEST_CASE("constant resistances only refresh on the full level") {
  const int n = 8;  // full refresh every 2^3 calls
  SelectVector sv(n, 0.05);
  Vec r = Vec::Constant(n, 1.5);
  for (long i = 0; i < 40; ++i) {
    const auto& S = sv.select(r, i);
    if (i > 0 && i % 8 != 0) CHECK(S.empty());
    if (i % 8 == 0) CHECK(S.size() == static_cast<std::size_t>(n));
  }
}

TEST_CASE("a doubling coordinate enters every update set") {
  SelectVector sv(4, 0.1);
  Vec r = Vec::Ones(4);
  for (long i = 0; i < 16; ++i) {
    const auto& S = sv.select(r, i);
    CHECK(std::find(S.begin(), S.end(), 1) != S.end());
    if (i > 0 && i % 4 != 0) CHECK(S.size() == 1);
    CHECK(std::abs(std::log(sv.rbar()(1) / r(1))) == 0.0);
    r(1) *= 2;
  }
}

TEST_CASE("call counters must be consecutive") {
  SelectVector sv(4, 0.1);
  sv.select(Vec::Ones(4), 0);
  CHECK_THROWS_AS(sv.select(Vec::Ones(4), 2), Error);
  CHECK_THROWS_AS(sv.select(Vec::Ones(3), 1), Error);
}

TEST_CASE("width syncs are exact and local") {
  SelectVector sv(5, 0.1);
  Vec r = Vec::Ones(5);
  sv.select(r, 0);
  Vec moved = r;
  moved(2) = 1.01;
  moved(4) = 0.99;
  sv.note_width_update(0, {2}, moved);
  CHECK(sv.rbar()(2) == moved(2));
  CHECK(sv.rbar()(4) == 1.0);
  CHECK(sv.last_width(2) == 0);
}

TEST_CASE("dyadic scheme matches a full-history replay with interleaved width steps") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + trial % 9;
    const double delta = 0.05 + 0.1 * u01(gen);
    SelectVector sv(n, delta);
    DyadicReplay ref(n, delta);
    Vec r = Vec::Ones(n);
    for (long i = 0; i < 60; ++i) {
      for (int e = 0; e < n; ++e) r(e) *= std::exp((u01(gen) - 0.5) * 0.02);
      auto got = sorted(sv.select(r, i));
      CHECK(got == ref.select(r));
      CHECK((sv.rbar() - ref.rbar).cwiseAbs().maxCoeff() == 0.0);
      CHECK((sv.rbar().array() / r.array()).log().abs().maxCoeff() <= delta + 1e-12);
      if (u01(gen) < 0.3) {
        std::vector<int> coords;
        for (int e = 0; e < n; ++e)
          if (u01(gen) < 0.3) {
            coords.push_back(e);
            r(e) *= 1.05;
          }
        sv.note_width_update(i, coords, r);
        ref.width(coords, r);
        CHECK((sv.rbar() - ref.rbar).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
}

TEST_CASE("bucket classification") {
  BucketDecomposition b(1.0, 16);
  CHECK(classify_iteration(b, 1.0) == 0);
  CHECK(classify_iteration(b, 0.0) == b.log_T);
  CHECK(classify_iteration(b, 1.0 / 3.0) == 1);
  CHECK(classify_iteration(b, 0.5) == 1);
  CHECK(classify_iteration(b, 0.26) == 1);
  CHECK(classify_iteration(b, 0.25) == 2);
  CHECK(classify_iteration(b, 1.0 / 16.0) == b.log_T);
  CHECK_THROWS_AS(classify_iteration(b, 1.5), Error);
  try {
    classify_iteration(b, 2.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::budget_exceeded);
  }
}

namespace {

// Full-history replay of the cubic-mass rule.
std::vector<std::vector<int>> replay_cubic(const std::vector<Vec>& rs, double delta, long T, double zeta) {
  const int n = static_cast<int>(rs[0].size());
  const int log_n = ceil_log2(n);
  const double thr = delta / (10.0 * log_n * log_n);
  BucketDecomposition decomp(zeta, T);
  std::vector<std::vector<Vec>> members(decomp.log_T + 1);
  std::vector<std::vector<int>> out{all_of(n)};
  for (std::size_t t = 1; t < rs.size(); ++t) {
    Vec a = ((rs[t].array() / rs[t - 1].array()) - 1.0).abs().matrix();
    const int j = decomp.classify(a.array().cube().sum());
    members[j].push_back(a);
    const long k = static_cast<long>(members[j].size());
    std::vector<int> S;
    for (int e = 0; e < n; ++e) {
      for (int l = 0; l <= decomp.log_T; ++l) {
        const long step = 1L << l;
        if (k % step) continue;
        double sum = 0;
        // ranks k - 2^l .. k inclusive; rank q is members[j][q - 1]
        for (long q = std::max(1L, k - step); q <= k; ++q) sum += members[j][q - 1](e);
        if (sum >= thr) {
          S.push_back(e);
          break;
        }
      }
    }
    out.push_back(S);
  }
  return out;
}

}  // namespace

TEST_CASE("cubic scheme: constant resistances never update") {
  SelectVectorL3 sv(6, 0.1, 32, 1.0);
  Vec r = Vec::Constant(6, 2.0);
  sv.select(r, 0);
  for (long t = 1; t < 32; ++t) CHECK(sv.select(r, t).empty());
}

TEST_CASE("cubic scheme: first bucket member uses a unit window") {
  SelectVectorL3 sv(4, 0.3, 8, 1.0);
  Vec r = Vec::Ones(4);
  sv.select(r, 0);
  r(0) *= 1.0 + 2.0 * sv.threshold();
  auto S = sv.select(r, 1);
  CHECK(S == std::vector<int>{0});
}

TEST_CASE("cubic scheme: doubling coordinate matches replay") {
  const long T = 8;
  SelectVectorL3 sv(4, 0.3, T, 1.0);
  std::vector<Vec> rs;
  Vec r = Vec::Ones(4);
  for (long t = 0; t < T; ++t) {
    rs.push_back(r);
    r(2) *= 2;
  }
  auto want = replay_cubic(rs, 0.3, T, 1.0);
  for (long t = 0; t < T; ++t) CHECK(sorted(sv.select(rs[t], t)) == want[t]);
}

TEST_CASE("cubic scheme: random monotone histories match replay and stay within delta") {
  std::mt19937_64 gen(33);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5 + trial;
    const long T = 64;
    const double delta = 0.2;
    std::vector<Vec> rs;
    Vec r = Vec::Ones(n);
    for (long t = 0; t < T; ++t) {
      rs.push_back(r);
      for (int e = 0; e < n; ++e) r(e) *= 1.0 + 0.01 * std::pow(u01(gen), 3);
      if (u01(gen) < 0.1) r(static_cast<int>(u01(gen) * n)) *= 1.2;
    }
    SelectVectorL3 sv(n, delta, T, 1.0);
    auto want = replay_cubic(rs, delta, T, 1.0);
    double worst = 0;
    for (long t = 0; t < T; ++t) {
      CHECK(sorted(sv.select(rs[t], t)) == want[t]);
      worst = std::max(worst, (sv.rbar().array() / rs[t].array()).log().abs().maxCoeff());
    }
    CHECK(worst <= delta + 1e-12);
    std::size_t total = 0;
    for (const auto& b : sv.decomposition().buckets) total += b.size();
    CHECK(total == static_cast<std::size_t>(T - 1));
  }
}

TEST_CASE("cubic scheme rejects decreasing resistances") {
  SelectVectorL3 sv(3, 0.1, 8, 1.0);
  sv.select(Vec::Ones(3), 0);
  Vec r = Vec::Ones(3);
  r(1) = 0.9;
  CHECK_THROWS_AS(sv.select(r, 1), Error);
}

TEST_CASE("update sets respect the low-rank budget shape") {
  // Windows of 2^l steps with per-step squared log mass <= z2 touch at most
  // K (log n / delta)^2 z2 4^l coordinates; report K.
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  const int n = 64;
  const double delta = 0.1;
  SelectVector sv(n, delta);
  Vec r = Vec::Ones(n);
  std::vector<double> z2;
  for (long i = 0; i < 128; ++i) {
    sv.select(r, i);
    Vec step(n);
    for (int e = 0; e < n; ++e) step(e) = 0.003 * nd(gen);
    z2.push_back(step.squaredNorm());
    r.array() *= step.array().exp();
  }
  const double L = ceil_log2(n);
  double K = 0;
  for (int l = 0; l <= 5; ++l) {
    const long w = 1L << l;
    for (long s = 1; s + w <= 128; s += w) {
      std::vector<int> uni;
      double zmax = 0;
      for (long i = s; i < s + w; ++i) {
        uni.insert(uni.end(), sv.update_log()[i].begin(), sv.update_log()[i].end());
        zmax = std::max(zmax, z2[i - 1]);
      }
      uni = sorted(uni);
      if (uni.size() == static_cast<std::size_t>(n)) continue;  // full refresh level
      K = std::max(K, uni.size() / ((L / delta) * (L / delta) * zmax * w * w));
    }
  }
  MESSAGE("measured budget constant K = " << K);
  CHECK(K > 0);
  CHECK(std::isfinite(K));
}
