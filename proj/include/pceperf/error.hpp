#ifndef PCEPERF_ERROR_HPP
#define PCEPERF_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace pceperf {

enum class ErrorCode {
  Domain,            // argument outside the supported domain / support
  UnsupportedDegree, // polynomial degree above the recurrence cap
  Numerical,         // eigen solver or iteration failure
  SizeLimit,         // rule or basis too large
  Underdetermined,   // fewer samples than basis terms
  RankDeficient,     // numerically rank-deficient design matrix
  Degenerate,        // zero mean / zero variance where a ratio is required
  InsufficientSamples,
  Instability,       // queueing model outside its stable region
  Evaluation,        // black-box evaluator failed
  Parse,             // malformed input file
  Config,            // invalid analysis configuration
  Version,           // unsupported serialized document version
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for the library. Every failure carries a machine-readable
/// code; the CLI maps codes onto process exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Evaluator failure at a specific sample or quadrature node.
class EvaluationError : public Error {
 public:
  EvaluationError(std::size_t index, const std::string& message)
      : Error(ErrorCode::Evaluation,
              "evaluation failed at index " + std::to_string(index) + ": " + message),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace pceperf

#endif  // PCEPERF_ERROR_HPP
