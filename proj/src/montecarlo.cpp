#include "pceperf/montecarlo.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pceperf/error.hpp"
#include "pceperf/special.hpp"

namespace pceperf::montecarlo {

namespace {

constexpr std::size_t kNormalFromSamples = 30;

void check_open_unit(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::Domain, fmt::format("{}: probability {} outside (0, 1)", what, p));
  }
}

}  // namespace

void validate(const McConfig& cfg) {
  if (!(cfg.tolerance > 0.0 && cfg.tolerance < 1.0))
    throw Error(ErrorCode::Config, "mc.tolerance must lie in (0, 1)");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw Error(ErrorCode::Config, "mc.alpha must lie in (0, 1)");
  if (cfg.min_samples < 2) throw Error(ErrorCode::Config, "mc.min_samples must be at least 2");
  if (cfg.max_samples < cfg.min_samples)
    throw Error(ErrorCode::Config, "mc.max_samples must be >= mc.min_samples");
}

double z_quantile(double p) {
  check_open_unit(p, "z_quantile");
  return special::normal_quantile(p);
}

double t_quantile(double p, unsigned df) {
  check_open_unit(p, "t_quantile");
  if (df < 1) throw Error(ErrorCode::Domain, "t_quantile needs df >= 1");
  return special::student_t_quantile(p, df);
}

double critical_value(std::size_t i, double alpha) {
  const double p = 1.0 - alpha / 2.0;
  if (i < kNormalFromSamples) return t_quantile(p, static_cast<unsigned>(i - 1));
  return z_quantile(p);
}

double relative_error(std::size_t i, double mean, double mean_square, double alpha) {
  if (!(std::abs(mean) >= 1e-300)) {
    throw Error(ErrorCode::Degenerate,
                fmt::format("relative error undefined: mean response {} after {} samples", mean, i));
  }
  const double spread = std::sqrt(std::max(0.0, mean_square - mean * mean));
  return 2.0 * critical_value(i, alpha) / std::sqrt(static_cast<double>(i)) * spread / std::abs(mean);
}

McResult run_mc_on_responses(const std::function<double(std::size_t)>& response, const McConfig& cfg) {
  validate(cfg);
  McResult result;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 1; i <= cfg.max_samples; ++i) {
    const double r = response(i - 1);
    if (!std::isfinite(r)) throw EvaluationError(i - 1, "non-finite response");
    sum += r;
    sum_sq += r * r;
    result.samples_used = i;
    result.mean = sum / static_cast<double>(i);
    result.mean_square = sum_sq / static_cast<double>(i);
    if (i < cfg.min_samples) continue;
    result.relative_error = relative_error(i, result.mean, result.mean_square, cfg.alpha);
    result.error_trace.push_back({i, result.relative_error});
    if (result.relative_error <= cfg.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.sd = std::sqrt(std::max(0.0, result.mean_square - result.mean * result.mean));
  return result;
}

McResult run_mc(const Evaluator& evaluator, const inputspace::ProblemSpec& spec, const McConfig& cfg) {
  inputspace::GermSampler sampler(spec, cfg.seed);
  return run_mc_on_responses(
      [&](std::size_t index) {
        const Eigen::RowVectorXd physical = inputspace::to_physical(spec, sampler.next());
        try {
          return evaluator(physical);
        } catch (const EvaluationError&) {
          throw;
        } catch (const std::exception& e) {
          throw EvaluationError(index, e.what());
        }
      },
      cfg);
}

}  // namespace pceperf::montecarlo
