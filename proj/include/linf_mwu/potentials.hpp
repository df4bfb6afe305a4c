#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "linf_mwu/l2_oracle.hpp"
#include "linf_mwu/problem.hpp"

namespace linf_mwu {

double phi(const Vec& w);

// min{1, ||target - C lstsq(C, target)||^2}
double psi_lower_bound(const Instance& inst, const OracleConfig& cfg = {});

enum class StepKind { primal, width };

const char* to_string(StepKind k);
StepKind parse_step_kind(const std::string& s);

struct TraceRecord {
  long iter_i = 0;
  long iter_k = 0;
  StepKind step = StepKind::primal;
  double phi = 0;
  double psi = 0;
  long width_set_size = 0;
  double max_abs_residual = 0;
  long update_rank = 0;
};

struct PotentialTrace {
  std::vector<TraceRecord> records;

  void record(const TraceRecord& r) { records.push_back(r); }
  void record(long i, long k, StepKind step, double phi, double psi, long width_set_size = 0,
              double max_abs_residual = 0, long update_rank = 0);
  // Validating overload for external string input.
  void record(long i, long k, const std::string& step, double phi, double psi, long width_set_size = 0,
              double max_abs_residual = 0, long update_rank = 0);
  std::size_t size() const { return records.size(); }

  void write_csv(std::ostream& out) const;
  static PotentialTrace read_csv(std::istream& in);
};

inline constexpr const char* kTraceHeader =
    "iter_i,iter_k,step,phi,psi,width_set_size,max_abs_residual,update_rank";

// 17 significant digits.
std::string format_double(double x);

}  // namespace linf_mwu
