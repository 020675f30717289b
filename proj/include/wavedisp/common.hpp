#pragma once

#include <stdexcept>
#include <string>

namespace wavedisp {

// Boundary side of the spectrum: +1 selects the outgoing limit, -1 the incoming one.
enum class Sign : int { plus = 1, minus = -1 };

inline constexpr double sign_value(Sign s) { return static_cast<int>(s); }

enum class ErrorCode : int {
  domain = 1,
  configuration,
  near_singular,
  precondition,
  plan,
  tail,
  fit,
  horizon,
  parse,
  io,
  internal,
};

const char* error_code_name(ErrorCode code);

// Three significant digits for messages, e.g. 1.2e-07.
std::string to_scientific(double x);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace wavedisp
