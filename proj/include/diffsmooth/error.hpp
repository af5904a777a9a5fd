#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace diffsmooth {

enum class ErrorKind {
  InvalidArgument,
  SimulationDiverged,
  OutOfRange,
  UnsupportedOrder,
  NearSingularMean,
  ClosureUnsupported,
  TailUnderflow,
  Resolution,
  DomainTooSmall,
  SchemeInstability,
  DegenerateProduct,
  LogDomain,
  DegenerateControl,
  TrajectoryDegenerate,
  Unidentifiable,
  UnreliableEstimate,
  SupportMismatch,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. Every failure path names its kind so callers
/// (the CLI in particular) can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace diffsmooth
