#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "linf_mwu/inverse_maintenance.hpp"

namespace linf_mwu {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0;
  double bound = 0;
  std::string detail;

  nlohmann::json to_json() const;
};

struct TraceStats {
  long queries = 0;
  long updates = 0;
  long resets = 0;
  long partial_resets = 0;
  double max_rel_error = 0;      // queried entries vs fresh inversion
  double max_sum_rel_error = 0;  // query_sum vs explicit sum (implicit kind)
};

// Random update / reset / partial-reset / query trace on a dim x dim matrix,
// every answer compared with a fresh inversion.
TraceStats run_inverse_trace(MaintainerKind kind, int dim, std::uint64_t seed, int steps = 40,
                             bool fault_inject = false);

struct VerifyConfig {
  std::uint64_t seed = 1;
  bool fault_inject = false;
  int instances = 5;
};

std::vector<CheckResult> run_verify(const VerifyConfig& cfg);

}  // namespace linf_mwu
