#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <sstream>

#include "linf_mwu/error.hpp"
#include "linf_mwu/potentials.hpp"

using namespace linf_mwu;

TEST_CASE("phi is the l1 norm") {
  CHECK(phi(Vec::Ones(4)) == 4);
  CHECK(phi(Vec::Zero(5)) == 0);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0, 2);
  Vec w(10);
  double sum = 0;
  for (int e = 0; e < 10; ++e) sum += (w(e) = u(gen));
  CHECK(phi(w) == doctest::Approx(sum).epsilon(1e-15));
  Vec s(2);
  s << -1, 2;
  CHECK(phi(s) == 3);
}

TEST_CASE("energy lower bound") {
  Instance inst;
  inst.n = 2;
  inst.d_dim = 1;
  inst.C.resize(2, 1);
  inst.C << 1, 1;
  inst.target.resize(2);
  inst.target << 0, 2;
  CHECK(psi_lower_bound(inst) == doctest::Approx(1.0));

  inst.target << 3, 3;
  CHECK(psi_lower_bound(inst) <= 1e-18);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Instance r = generate(seed, 25, 3, parse_distribution("gaussian"));
    r.target *= 0.1;  // keep the residual below the cap on some seeds
    const double ls = (r.target - r.C * least_squares(r)).squaredNorm();
    CHECK(psi_lower_bound(r) == doctest::Approx(std::min(1.0, ls)).epsilon(1e-9));
  }
}

TEST_CASE("trace records and validation") {
  PotentialTrace tr;
  tr.record(0, 0, StepKind::primal, 10, 1.5);
  CHECK(tr.size() == 1);
  tr.record(0, 1, "width", 10.5, 2.0, 3, 1.25, 4);
  CHECK(tr.size() == 2);
  CHECK(tr.records[1].step == StepKind::width);
  CHECK_THROWS_AS(tr.record(1, 1, "dual", 1, 1), Error);
  CHECK(tr.size() == 2);
  CHECK_THROWS_AS(parse_step_kind("Primal"), Error);
}

TEST_CASE("trace CSV round trip") {
  PotentialTrace tr;
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 20; ++i)
    tr.record(i, i % 3, i % 4 == 0 ? StepKind::width : StepKind::primal, 1 + u(gen) * 1e3, u(gen) / 3.0, i % 5,
              u(gen) * 7, i * 11);
  std::stringstream ss;
  tr.write_csv(ss);
  std::string header;
  std::getline(std::istringstream(ss.str()), header);
  CHECK(header == kTraceHeader);
  PotentialTrace back = PotentialTrace::read_csv(ss);
  REQUIRE(back.size() == tr.size());
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const auto &a = tr.records[j], &b = back.records[j];
    CHECK(a.iter_i == b.iter_i);
    CHECK(a.iter_k == b.iter_k);
    CHECK(a.step == b.step);
    CHECK(a.phi == b.phi);
    CHECK(a.psi == b.psi);
    CHECK(a.width_set_size == b.width_set_size);
    CHECK(a.max_abs_residual == b.max_abs_residual);
    CHECK(a.update_rank == b.update_rank);
  }
  std::istringstream bad("not,a,trace\n");
  CHECK_THROWS_AS(PotentialTrace::read_csv(bad), Error);
}

TEST_CASE("seventeen-digit formatting round trips") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, -2.5}) CHECK(std::stod(format_double(x)) == x);
}
