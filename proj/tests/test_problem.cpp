#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <random>

#include "linf_mwu/chebyshev.hpp"
#include "linf_mwu/error.hpp"
#include "linf_mwu/problem.hpp"

using namespace linf_mwu;

namespace {

Instance make(std::initializer_list<std::initializer_list<double>> rows, std::initializer_list<double> t) {
  Instance inst;
  inst.n = static_cast<int>(rows.size());
  inst.d_dim = static_cast<int>(rows.begin()->size());
  inst.C.resize(inst.n, inst.d_dim);
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (double v : r) inst.C(i, j++) = v;
    ++i;
  }
  inst.target.resize(inst.n);
  i = 0;
  for (double v : t) inst.target(i++) = v;
  return inst;
}

}  // namespace

TEST_CASE("doubling a 1x1 instance") {
  DoubledInstance dbl = double_instance(make({{1}}, {2}));
  REQUIRE(dbl.rows() == 2);
  CHECK(dbl.C_tilde(0, 0) == 1);
  CHECK(dbl.C_tilde(1, 0) == -1);
  CHECK(dbl.d_tilde(0) == 2);
  CHECK(dbl.d_tilde(1) == -2);
}

TEST_CASE("doubling a 2x1 instance") {
  DoubledInstance dbl = double_instance(make({{1}, {1}}, {0, 2}));
  REQUIRE(dbl.rows() == 4);
  CHECK(dbl.half() == 2);
  const double c[] = {1, 1, -1, -1}, d[] = {0, 2, 0, -2};
  for (int e = 0; e < 4; ++e) {
    CHECK(dbl.C_tilde(e, 0) == c[e]);
    CHECK(dbl.d_tilde(e) == d[e]);
  }
}

TEST_CASE("doubled residual equals original residual") {
  Instance inst = generate(3, 5, 2, parse_distribution("gaussian"));
  DoubledInstance dbl = double_instance(inst);
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    Vec x(2);
    x << nd(gen), nd(gen);
    CHECK(residual_inf(dbl, x) == doctest::Approx(residual_inf(inst, x)).epsilon(1e-15));
    Vec u = dbl.C_tilde * x - dbl.d_tilde;
    for (int e = 0; e < 5; ++e) CHECK(u(e + 5) == -u(e));
  }
}

TEST_CASE("normalize") {
  Instance inst = make({{1}, {1}}, {0, 2});
  Instance same = normalize(inst, 1.0);
  CHECK(same.C == inst.C);
  CHECK(same.target == inst.target);

  Instance half = normalize(inst, 2.0);
  CHECK(half.C(0, 0) == 0.5);
  CHECK(half.C(1, 0) == 0.5);
  CHECK(half.target(0) == 0);
  CHECK(half.target(1) == 1);

  CHECK_THROWS_AS(normalize(inst, 0.0), Error);
  CHECK_THROWS_AS(normalize(inst, -1.0), Error);
  try {
    normalize(inst, 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_scale);
  }
}

TEST_CASE("normalizing by the exact optimum gives optimum one") {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    Instance inst = generate(s, 12, 2, parse_distribution("gaussian"));
    const double opt = bruteforce_opt(inst).opt;
    CHECK(bruteforce_opt(normalize(inst, opt)).opt == doctest::Approx(1.0).epsilon(1e-12));
    const double scale = 3.5;
    CHECK(bruteforce_opt(normalize(inst, scale)).opt * scale == doctest::Approx(opt).epsilon(1e-9));
  }
}

TEST_CASE("generation is deterministic and shaped") {
  Instance a = generate(7, 20, 3, parse_distribution("gaussian"));
  Instance b = generate(7, 20, 3, parse_distribution("gaussian"));
  CHECK(a.n == 20);
  CHECK(a.d_dim == 3);
  CHECK(a.C.rows() == 20);
  CHECK(a.C.cols() == 3);
  CHECK(a.C.allFinite());
  CHECK(a.target.allFinite());
  CHECK(a.C == b.C);
  CHECK(a.target == b.target);
  Instance c = generate(8, 20, 3, parse_distribution("gaussian"));
  CHECK(c.C != a.C);
  Instance u = generate(7, 20, 3, parse_distribution("uniform"));
  CHECK(u.C.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("ill-conditioned generation hits the requested condition number") {
  Instance inst = generate(11, 30, 4, parse_distribution("ill_conditioned", 1e6));
  Eigen::JacobiSVD<Mat> svd(Mat(inst.C));
  const Vec s = svd.singularValues();
  const double kappa = s(0) / s(s.size() - 1);
  CHECK(kappa >= 1e5);
  CHECK(kappa <= 1e7);
}

TEST_CASE("unknown distribution is rejected") {
  CHECK_THROWS_AS(parse_distribution("cauchy"), Error);
}

TEST_CASE("validation rejects bad instances") {
  Instance inst = make({{1, 2}}, {1});
  CHECK_THROWS_AS(inst.validate(), Error);  // d_dim > n
  Instance nan = make({{1}, {std::nan("")}}, {0, 1});
  CHECK_THROWS_AS(nan.validate(), Error);
}

TEST_CASE("json round trip") {
  Instance inst = generate(5, 6, 2, parse_distribution("gaussian"));
  inst.scale_hint = 0.75;
  Instance back = instance_from_json(to_json(inst));
  CHECK(back.C == inst.C);
  CHECK(back.target == inst.target);
  REQUIRE(back.scale_hint.has_value());
  CHECK(*back.scale_hint == 0.75);

  const std::string path = "test_problem_roundtrip.json";
  save_instance(inst, path);
  Instance file = load_instance(path);
  CHECK(file.C == inst.C);
  CHECK(file.target == inst.target);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_instance("/nonexistent/instance.json"), Error);
}

TEST_CASE("least squares solves the normal equations") {
  Instance inst = generate(4, 15, 3, parse_distribution("gaussian"));
  Vec x = least_squares(inst);
  Vec g = inst.C.transpose() * (inst.C * x - inst.target);
  CHECK(g.cwiseAbs().maxCoeff() <= 1e-10);
}
