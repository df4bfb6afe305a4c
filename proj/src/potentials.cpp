#include "linf_mwu/potentials.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "linf_mwu/error.hpp"

namespace linf_mwu {

double phi(const Vec& w) { return w.cwiseAbs().sum(); }

double psi_lower_bound(const Instance& inst, const OracleConfig& cfg) {
  Vec ones = Vec::Ones(inst.n);
  OracleResult res = solve_direct(inst.C, inst.target, ones, cfg);
  return std::min(1.0, res.residual_u.squaredNorm());
}

const char* to_string(StepKind k) { return k == StepKind::primal ? "primal" : "width"; }

StepKind parse_step_kind(const std::string& s) {
  if (s == "primal") return StepKind::primal;
  if (s == "width") return StepKind::width;
  throw Error(ErrorCode::invalid_parameter, "unknown step kind: " + s);
}

void PotentialTrace::record(long i, long k, StepKind step, double phi_v, double psi_v, long width_set_size,
                            double max_abs_residual, long update_rank) {
  records.push_back({i, k, step, phi_v, psi_v, width_set_size, max_abs_residual, update_rank});
}

void PotentialTrace::record(long i, long k, const std::string& step, double phi_v, double psi_v,
                            long width_set_size, double max_abs_residual, long update_rank) {
  record(i, k, parse_step_kind(step), phi_v, psi_v, width_set_size, max_abs_residual, update_rank);
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void PotentialTrace::write_csv(std::ostream& out) const {
  out << kTraceHeader << "\n";
  for (const auto& r : records) {
    out << r.iter_i << ',' << r.iter_k << ',' << to_string(r.step) << ',' << format_double(r.phi) << ','
        << format_double(r.psi) << ',' << r.width_set_size << ',' << format_double(r.max_abs_residual) << ','
        << r.update_rank << "\n";
  }
}

PotentialTrace PotentialTrace::read_csv(std::istream& in) {
  PotentialTrace t;
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw Error(ErrorCode::io_error, "trace CSV header mismatch");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[8];
    for (int j = 0; j < 8; ++j)
      if (!std::getline(ss, f[j], ',')) throw Error(ErrorCode::io_error, "short trace CSV row");
    TraceRecord r;
    r.iter_i = std::stol(f[0]);
    r.iter_k = std::stol(f[1]);
    r.step = parse_step_kind(f[2]);
    r.phi = std::stod(f[3]);
    r.psi = std::stod(f[4]);
    r.width_set_size = std::stol(f[5]);
    r.max_abs_residual = std::stod(f[6]);
    r.update_rank = std::stol(f[7]);
    t.records.push_back(r);
  }
  return t;
}

}  // namespace linf_mwu
