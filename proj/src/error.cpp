#include "diffsmooth/error.hpp"

namespace diffsmooth {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::SimulationDiverged: return "simulation diverged";
    case ErrorKind::OutOfRange: return "out of range";
    case ErrorKind::UnsupportedOrder: return "unsupported order";
    case ErrorKind::NearSingularMean: return "near-singular mean";
    case ErrorKind::ClosureUnsupported: return "closure unsupported";
    case ErrorKind::TailUnderflow: return "tail underflow";
    case ErrorKind::Resolution: return "insufficient resolution";
    case ErrorKind::DomainTooSmall: return "domain too small";
    case ErrorKind::SchemeInstability: return "scheme instability";
    case ErrorKind::DegenerateProduct: return "degenerate product";
    case ErrorKind::LogDomain: return "log domain";
    case ErrorKind::DegenerateControl: return "degenerate control";
    case ErrorKind::TrajectoryDegenerate: return "trajectory degenerate";
    case ErrorKind::Unidentifiable: return "unidentifiable parameter";
    case ErrorKind::UnreliableEstimate: return "unreliable estimate";
    case ErrorKind::SupportMismatch: return "support mismatch";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

}  // namespace diffsmooth
