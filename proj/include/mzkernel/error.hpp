#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mzkernel {

enum class ErrorCode {
  invalid_model,
  invalid_mass,
  shape,
  asymmetry,
  degenerate_bond,
  partition,
  empty_basis,
  size,
  indefinite_hessian,
  operator_asymmetry,
  grid,
  consistency,
  policy_refusal,
  io,
  config,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures are reported through this one exception type; the
// code says which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mzkernel
