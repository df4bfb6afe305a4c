#include "linf_mwu/report.hpp"

#include <cmath>
#include <sstream>

#include "linf_mwu/potentials.hpp"

namespace linf_mwu {

namespace {

void emit(std::ostringstream& out, const nlohmann::json& j, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out << '\n' << std::string(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out << ',';
        first = false;
        newline(depth + 1);
        out << nlohmann::json(it.key()).dump() << (indent < 0 ? ":" : ": ");
        emit(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out << '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      out << '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out << ',';
        first = false;
        newline(depth + 1);
        emit(out, v, indent, depth + 1);
      }
      newline(depth);
      out << ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isfinite(v))
        out << format_double(v);
      else
        out << "null";
      return;
    }
    default:
      out << j.dump();
  }
}

}  // namespace

std::string dump_json17(const nlohmann::json& j, int indent) {
  std::ostringstream out;
  emit(out, j, indent, 0);
  return out.str();
}

nlohmann::json make_report(const SolverRun& run, double residual_inf) {
  nlohmann::json j;
  j["x"] = std::vector<double>(run.x_hat.data(), run.x_hat.data() + run.x_hat.size());
  j["residual_inf"] = residual_inf;
  j["iterations"] = {{"primal", run.primal_steps}, {"width", run.width_steps}};
  j["status"] = to_string(run.status);
  j["op_counts"] = run.op_counts.to_json();
  j["params_used"] = run.params.to_json();
  return j;
}

int exit_code_for(RunStatus s) {
  switch (s) {
    case RunStatus::ok:
    case RunStatus::iter_cap:
    case RunStatus::psi0_clamped:
      return 0;
    default:
      return 3;
  }
}

nlohmann::json error_json(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace linf_mwu
