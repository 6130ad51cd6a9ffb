#include "pceperf/error.hpp"

namespace pceperf {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Domain: return "E_DOMAIN";
    case ErrorCode::UnsupportedDegree: return "E_UNSUPPORTED_DEGREE";
    case ErrorCode::Numerical: return "E_NUMERICAL";
    case ErrorCode::SizeLimit: return "E_SIZE_LIMIT";
    case ErrorCode::Underdetermined: return "E_UNDERDETERMINED";
    case ErrorCode::RankDeficient: return "E_RANK_DEFICIENT";
    case ErrorCode::Degenerate: return "E_DEGENERATE";
    case ErrorCode::InsufficientSamples: return "E_INSUFFICIENT_SAMPLES";
    case ErrorCode::Instability: return "E_INSTABILITY";
    case ErrorCode::Evaluation: return "E_EVALUATION";
    case ErrorCode::Parse: return "E_PARSE";
    case ErrorCode::Config: return "E_CONFIG";
    case ErrorCode::Version: return "E_VERSION";
    case ErrorCode::Io: return "E_IO";
  }
  return "E_UNKNOWN";
}

}  // namespace pceperf
