#pragma once

#include <stdexcept>
#include <string>

namespace linf_mwu {

enum class ErrorCode {
  invalid_instance,
  invalid_scale,
  unsupported_distribution,
  singular_oracle,
  stale_maintainer,
  dimension_mismatch,
  internal_consistency,
  contract_violation,
  budget_exceeded,
  invalid_parameter,
  invariant_breach,
  io_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Singular normal matrix; carries the reciprocal condition estimate.
class SingularOracleError : public Error {
 public:
  SingularOracleError(const std::string& what, double rcond)
      : Error(ErrorCode::singular_oracle, what), rcond_(rcond) {}

  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

}  // namespace linf_mwu
