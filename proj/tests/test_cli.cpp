#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "linf_mwu/bench.hpp"
#include "linf_mwu/chebyshev.hpp"
#include "linf_mwu/potentials.hpp"
#include "linf_mwu/problem.hpp"

using namespace linf_mwu;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(LINF_MWU_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("solve the bundled example") {
  Result r = run("solve");
  CHECK(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  for (const char* key : {"x", "residual_inf", "iterations", "status", "op_counts", "params_used"})
    CHECK(j.contains(key));
  const double opt = bruteforce_opt(load_instance(LINF_MWU_EXAMPLE)).opt;
  CHECK(j["residual_inf"].get<double>() <= (1 + 10 * 0.1) * opt);
  CHECK(j["iterations"]["primal"].get<long>() > 0);
}

TEST_CASE("every algorithm and backend runs from the command line") {
  for (const char* a : {"monotone", "stable", "robust", "opt", "baseline-unaccelerated"}) {
    Result r = run(std::string("solve --algo ") + a + " --max-iters 300");
    CHECK(r.code == 0);
    CHECK(nlohmann::json::parse(r.out).contains("x"));
  }
  for (const char* b : {"one-level", "two-level"}) {
    Result r = run(std::string("solve --backend ") + b + " --max-iters 300");
    CHECK(r.code == 0);
  }
}

TEST_CASE("missing input is a machine-readable error") {
  Result r = run("solve --input /nonexistent/file.json");
  CHECK(r.code == 2);
  auto j = nlohmann::json::parse(r.out);
  REQUIRE(j.contains("error"));
  CHECK(j["error"]["code"] == "io-error");

  Result bad = run("solve --algo simplex");
  CHECK(bad.code == 2);
  CHECK(nlohmann::json::parse(bad.out).contains("error"));

  Result usage = run("solve --no-such-flag");
  CHECK(usage.code == 2);
  CHECK(nlohmann::json::parse(usage.out)["error"]["code"] == "usage");
}

TEST_CASE("same seed gives byte-identical reports") {
  const std::string a = "cli_report_a.json", b = "cli_report_b.json";
  CHECK(run("solve --algo robust --seed 5 --max-iters 400 --output " + a).code == 0);
  CHECK(run("solve --algo robust --seed 5 --max-iters 400 --output " + b).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(!slurp(a).empty());
  std::remove(a.c_str());
  std::remove(b.c_str());
}

TEST_CASE("trace output") {
  const std::string path = "cli_trace.csv";
  CHECK(run("solve --normalized --max-iters 50 --trace " + path).code == 0);
  std::ifstream in(path);
  PotentialTrace tr = PotentialTrace::read_csv(in);
  CHECK(tr.size() >= 50);
  std::remove(path.c_str());
}

TEST_CASE("instance generation") {
  Result r = run("gen --n 12 --d 2 --seed 3");
  CHECK(r.code == 0);
  Instance inst = instance_from_json(nlohmann::json::parse(r.out));
  Instance direct = generate(3, 12, 2, parse_distribution("gaussian"));
  CHECK(inst.C == direct.C);
  CHECK(inst.target == direct.target);
}

TEST_CASE("bench CSV schema") {
  Result r = run("bench --ns 16 24 --seeds 2 --max-iters 2000");
  CHECK(r.code == 0);
  std::istringstream in(r.out);
  std::string header;
  std::getline(in, header);
  CHECK(header == kBenchHeader);
  int rows = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == 2 * 2 * 2);
}

TEST_CASE("verify passes and fault injection fails it") {
  Result ok = run("verify");
  CHECK(ok.code == 0);
  CHECK(nlohmann::json::parse(ok.out)["passed"] == true);

  Result bad = run("verify --fault-inject");
  CHECK(bad.code != 0);
  auto j = nlohmann::json::parse(bad.out);
  CHECK(j["passed"] == false);
  bool inverse_failed = false;
  for (const auto& c : j["checks"])
    if (c["name"].get<std::string>().rfind("inverse maintenance equivalence", 0) == 0 && !c["passed"].get<bool>())
      inverse_failed = true;
  CHECK(inverse_failed);
}
