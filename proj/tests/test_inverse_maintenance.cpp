#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "linf_mwu/error.hpp"
#include "linf_mwu/inverse_maintenance.hpp"
#include "linf_mwu/verify.hpp"

using namespace linf_mwu;

namespace {

Mat spd(std::uint64_t seed, int n) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = nd(gen);
  return A * A.transpose() / n + Mat::Identity(n, n);
}

UpdateBatch rank_one(const Vec& u, const Vec& v, double c) {
  UpdateBatch b;
  b.U = u;
  b.V = v;
  b.core = Mat::Constant(1, 1, c);
  return b;
}

UpdateBatch random_batch(std::mt19937_64& gen, int n, int k) {
  std::normal_distribution<double> nd;
  UpdateBatch b;
  b.U.resize(n, k);
  b.V.resize(n, k);
  b.core = Mat::Zero(k, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < n; ++i) {
      b.U(i, j) = 0.3 * nd(gen);
      b.V(i, j) = b.U(i, j) + 0.05 * nd(gen);
    }
    b.core(j, j) = 0.5;
  }
  return b;
}

double rel(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); }

std::vector<int> iota(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("initial inverse") {
  InverseMaintainer id(MaintainerKind::one_level, Mat::Identity(3, 3));
  CHECK(id.snapshot_inverse() == Mat::Identity(3, 3));

  Mat D = Mat::Zero(2, 2);
  D(0, 0) = 2;
  D(1, 1) = 4;
  InverseMaintainer dm(MaintainerKind::two_level, D);
  CHECK(dm.snapshot_inverse()(0, 0) == 0.5);
  CHECK(dm.snapshot_inverse()(1, 1) == 0.25);

  Mat M = spd(1, 8);
  InverseMaintainer r(MaintainerKind::one_level, M);
  CHECK((r.snapshot_inverse() * M - Mat::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-10);

  CHECK_THROWS_AS(InverseMaintainer(MaintainerKind::one_level, Mat::Zero(3, 3)), SingularOracleError);
  CHECK_THROWS_AS(InverseMaintainer(MaintainerKind::implicit, Mat::Identity(3, 3)), Error);
}

TEST_CASE("zero-width batch changes nothing") {
  InverseMaintainer im(MaintainerKind::two_level, spd(2, 5));
  Mat before = im.query_all();
  UpdateBatch empty;
  empty.U.resize(5, 0);
  empty.V.resize(5, 0);
  empty.core.resize(0, 0);
  im.update(empty);
  CHECK(im.k0() == 0);
  CHECK(im.query_all() == before);
}

TEST_CASE("dimension mismatch is rejected") {
  InverseMaintainer im(MaintainerKind::one_level, spd(3, 4));
  CHECK_THROWS_AS(im.update(rank_one(Vec::Ones(3), Vec::Ones(3), 1.0)), Error);
  CHECK_THROWS_AS(im.query({4}, {0}), Error);
}

TEST_CASE("two batches equal one merged batch") {
  std::mt19937_64 gen(4);
  Mat M = spd(4, 10);
  UpdateBatch a = random_batch(gen, 10, 2), b = random_batch(gen, 10, 3);
  InverseMaintainer two(MaintainerKind::one_level, M), one(MaintainerKind::one_level, M);
  two.update(a);
  two.update(b);
  UpdateBatch merged;
  merged.U.resize(10, 5);
  merged.U << a.U, b.U;
  merged.V.resize(10, 5);
  merged.V << a.V, b.V;
  merged.core = Mat::Zero(5, 5);
  merged.core.topLeftCorner(2, 2) = a.core;
  merged.core.bottomRightCorner(3, 3) = b.core;
  one.update(merged);
  Mat fresh = (M + a.reconstruct() + b.reconstruct()).inverse();
  CHECK(rel(two.query_all(), fresh) <= 1e-10);
  CHECK(rel(one.query_all(), fresh) <= 1e-10);
}

TEST_CASE("reset") {
  InverseMaintainer im(MaintainerKind::one_level, spd(5, 4));
  Mat before = im.snapshot_inverse();
  im.reset();
  CHECK(im.snapshot_inverse() == before);

  InverseMaintainer id(MaintainerKind::one_level, Mat::Identity(2, 2));
  id.update(rank_one(Vec::Unit(2, 0), Vec::Unit(2, 0), 1.0));
  id.reset();
  CHECK(id.snapshot_inverse()(0, 0) == doctest::Approx(0.5));
  CHECK(id.snapshot_inverse()(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(id.snapshot_inverse()(0, 1)) <= 1e-15);
  CHECK(id.k0() == 0);

  std::mt19937_64 gen(6);
  Mat M = spd(6, 12);
  InverseMaintainer r(MaintainerKind::one_level, M);
  for (int s = 0; s < 20; ++s) {
    UpdateBatch b = random_batch(gen, 12, 1 + s % 3);
    M += b.reconstruct();
    r.update(b);
    if (s % 4 == 3) r.reset();
  }
  r.reset();
  CHECK(rel(r.snapshot_inverse(), M.inverse()) <= 1e-8);
}

TEST_CASE("partial reset") {
  InverseMaintainer im(MaintainerKind::two_level, spd(7, 5));
  im.reset();
  im.partial_reset();
  CHECK(im.B().rows() == 0);
  CHECK(im.J().empty());

  Mat M = spd(8, 6);
  InverseMaintainer one(MaintainerKind::two_level, M);
  Vec u = Vec::Unit(6, 2), v = Vec::Unit(6, 2);
  UpdateBatch b = rank_one(u, v, 0.7);
  b.touched = {2};
  one.update(b);
  one.partial_reset();
  REQUIRE(one.B().rows() == 1);
  const double expected = 1.0 / (1.0 + 0.7 * M.inverse()(2, 2));
  CHECK(one.B()(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(one.J() == std::vector<int>{2});
  CHECK(one.k1() == 0);
  CHECK(one.k0() == 1);

  InverseMaintainer bad(MaintainerKind::one_level, M);
  CHECK_THROWS_AS(bad.partial_reset(), Error);
}

TEST_CASE("counter discipline") {
  std::mt19937_64 gen(9);
  InverseMaintainer im(MaintainerKind::two_level, spd(9, 8));
  im.update(random_batch(gen, 8, 2));
  im.update(random_batch(gen, 8, 1));
  CHECK(im.k0() == 3);
  CHECK(im.k1() == 3);
  im.partial_reset();
  CHECK(im.k0() == 3);
  CHECK(im.k1() == 0);
  im.update(random_batch(gen, 8, 2));
  CHECK(im.k1() <= im.k0());
  im.reset();
  CHECK(im.k0() == 0);
  CHECK(im.k1() == 0);
  CHECK(im.op_counts().resets == 1);
  CHECK(im.op_counts().partial_resets == 1);
}

TEST_CASE("query blocks") {
  std::mt19937_64 gen(10);
  Mat M = spd(10, 7);
  InverseMaintainer im(MaintainerKind::two_level, M);
  CHECK(im.query_all() == im.snapshot_inverse());
  UpdateBatch b = random_batch(gen, 7, 1);
  M += b.reconstruct();
  im.update(b);
  Mat row = im.query({3}, iota(7));
  Mat fresh = M.inverse();
  CHECK((row.row(0) - fresh.row(3)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("implicit running sum") {
  Mat M = spd(11, 6);
  Vec v = Vec::LinSpaced(6, -1, 1);
  InverseMaintainer im(MaintainerKind::implicit, M, v);
  CHECK((im.query_sum() - M.inverse() * v).cwiseAbs().maxCoeff() <= 1e-12);

  InverseMaintainer zero(MaintainerKind::implicit, M, Vec::Zero(6));
  std::mt19937_64 gen(12);
  zero.update(random_batch(gen, 6, 2));
  CHECK(zero.query_sum().cwiseAbs().maxCoeff() == 0.0);

  Vec sum = M.inverse() * v;
  for (int s = 0; s < 30; ++s) {
    UpdateBatch b = random_batch(gen, 6, 1 + s % 2);
    M += b.reconstruct();
    im.update(b);
    sum += M.inverse() * v;
    if (s % 7 == 6) im.reset();
    else if (s % 3 == 2) im.partial_reset();
    CHECK(rel(im.query_sum(), sum) <= 1e-8);
  }
}

TEST_CASE("near-singular inner block degrades to re-inversion") {
  InverseMaintainer im(MaintainerKind::one_level, Mat::Identity(3, 3));
  im.update(rank_one(Vec::Unit(3, 0), Vec::Unit(3, 0), -1.0 + 1e-11));
  im.reset();
  Mat M = Mat::Identity(3, 3);
  M(0, 0) = 1.0 + (-1.0 + 1e-11);
  CHECK(rel(im.snapshot_inverse(), M.inverse()) <= 1e-6);
  CHECK(im.degraded());
}

TEST_CASE("randomized traces agree with fresh inversion") {
  for (auto kind : {MaintainerKind::one_level, MaintainerKind::two_level, MaintainerKind::implicit}) {
    double worst = 0, worst_sum = 0;
    for (int t = 0; t < 100; ++t) {
      TraceStats st = run_inverse_trace(kind, 8 + t % 25, 1000 + t, 40);
      worst = std::max(worst, st.max_rel_error);
      worst_sum = std::max(worst_sum, st.max_sum_rel_error);
    }
    CHECK(worst <= 1e-8);
    CHECK(worst_sum <= 1e-8);
  }
}

TEST_CASE("fault injection breaks equivalence") {
  double worst = 0;
  for (int t = 0; t < 5; ++t) worst = std::max(worst, run_inverse_trace(MaintainerKind::two_level, 10, t, 40, true).max_rel_error);
  CHECK(worst > 1e-6);
}
