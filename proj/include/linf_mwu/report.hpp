#pragma once

#include <string>

#include "json.hpp"
#include "linf_mwu/mwu.hpp"

namespace linf_mwu {

// JSON text with every floating-point number written as %.17g.
std::string dump_json17(const nlohmann::json& j, int indent = -1);

// {"x", "residual_inf", "iterations": {"primal", "width"}, "status", "op_counts", "params_used"}
nlohmann::json make_report(const SolverRun& run, double residual_inf);

// Process exit code for a finished run: 0 for ok / iter-cap / psi0-clamped, 3 otherwise.
int exit_code_for(RunStatus s);

nlohmann::json error_json(const std::string& code, const std::string& message);

}  // namespace linf_mwu
