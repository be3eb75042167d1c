#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdfo {

enum class ErrorKind {
  parameter,
  shape,
  empty_request,
  degenerate_split,
  parse,
  validation,
  numeric,
  mode,
  training_diverged,
  ill_conditioned,
  degenerate_targets,
  fit,
  degeneracy,
  bounds_required,
  evaluation,
  empty_eligible,
  infeasible,
  division_by_zero,
  io,
  internal,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers can branch
/// on the category without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace sdfo
