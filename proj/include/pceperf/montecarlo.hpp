#ifndef PCEPERF_MONTECARLO_HPP
#define PCEPERF_MONTECARLO_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "pceperf/inputspace.hpp"

namespace pceperf::montecarlo {

struct McConfig {
  double tolerance = 0.05;
  double alpha = 0.05;
  std::size_t min_samples = 10;
  std::size_t max_samples = 1000;
  std::uint64_t seed = 0;
};

void validate(const McConfig& cfg);

struct TracePoint {
  std::size_t iteration;
  double relative_error;
};

struct McResult {
  std::size_t samples_used = 0;
  double mean = 0.0;
  double mean_square = 0.0;
  double sd = 0.0;
  double relative_error = 0.0;
  bool converged = false;
  std::vector<TracePoint> error_trace;
};

/// Standard normal quantile, p in (0, 1).
double z_quantile(double p);

/// Student-t quantile, p in (0, 1), df >= 1.
double t_quantile(double p, unsigned df);

/// Two-sided critical value q_{1 - alpha/2} used after i samples: Student-t
/// with i - 1 degrees of freedom below 30 samples, normal from 30 on.
double critical_value(std::size_t i, double alpha);

/// Relative error (2 q / sqrt(i)) * sqrt(max(0, mean_sq - mean^2)) / |mean|.
double relative_error(std::size_t i, double mean, double mean_square, double alpha);

using Evaluator = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&)>;

/// Monte Carlo with the sequential relative-error stopping rule. The i-th
/// physical sample is row i of sample_physical(spec, ., cfg.seed).
McResult run_mc(const Evaluator& evaluator, const inputspace::ProblemSpec& spec, const McConfig& cfg);

/// Same stopping rule over a pre-generated stream of responses (the first
/// `max_samples` entries are consumed at most).
McResult run_mc_on_responses(const std::function<double(std::size_t)>& response, const McConfig& cfg);

}  // namespace pceperf::montecarlo

#endif  // PCEPERF_MONTECARLO_HPP
