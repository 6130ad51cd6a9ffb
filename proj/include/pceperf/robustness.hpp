#ifndef PCEPERF_ROBUSTNESS_HPP
#define PCEPERF_ROBUSTNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pceperf/pce.hpp"

namespace pceperf::robustness {

/// Robustness of one performance index. CoV is SD / |mean| in percent.
struct RobustnessReport {
  std::string index_name;
  double mean;
  double sd;
  double cov_percent;
  unsigned degree;
  std::string fit_method;
};

inline constexpr const char* kCovDefinition = "cov_percent = 100 * sd / |mean|";

/// 100 * sd / |mean|. Throws Degenerate when |mean| <= 1e-12 * max(1, sd).
double cov(double mean, double sd);

RobustnessReport robustness_report(const pce::PceModel& model, const std::string& index_name);

struct LooReport {
  unsigned degree;
  double loo_error;
  std::size_t sample_count;
};

/// Relative leave-one-out error
///   sum_k ((y_k - yhat_k) / (1 - h_k))^2 / sum_k (y_k - ybar)^2
/// from the leverages of the least-squares design. Points whose leverage is
/// within 1e-10 of 1 are refitted with that point excluded.
LooReport loo_error(const pce::BasisSet& basis, const Eigen::Ref<const Eigen::MatrixXd>& germ_samples,
                    const Eigen::Ref<const Eigen::VectorXd>& outputs);

struct NoiseSpec {
  std::vector<double> ran_levels{20.0, 10.0, 5.0, 1.0};
  std::uint64_t seed = 0;
};

/// outputs + N(0, sigma^2) with sigma = |mean(outputs)| / ran.
Eigen::VectorXd add_noise(const Eigen::Ref<const Eigen::VectorXd>& outputs, double ran,
                          std::uint64_t seed);

/// Standard deviation of the noise add_noise would inject.
double noise_sigma(const Eigen::Ref<const Eigen::VectorXd>& outputs, double ran);

struct NoiseRow {
  double ran_level;
  std::optional<unsigned> best_degree;
  std::optional<double> loo_error;
  std::string error;  // non-empty when the level failed
};

/// For each level: inject noise with seed derived from (seed, level index),
/// select the degree and report its leave-one-out error. Rows follow the
/// order of `noise.ran_levels`.
std::vector<NoiseRow> noise_sweep(std::shared_ptr<const inputspace::ProblemSpec> spec,
                                  const Eigen::Ref<const Eigen::MatrixXd>& germ_samples,
                                  const Eigen::Ref<const Eigen::VectorXd>& outputs,
                                  const NoiseSpec& noise, unsigned d_max);

/// Silverman bandwidth 1.06 s n^(-1/5).
double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& samples);

/// Gaussian-kernel density estimate with the Silverman bandwidth.
std::vector<double> kde_pdf(const Eigen::Ref<const Eigen::VectorXd>& samples,
                            const std::vector<double>& grid);

}  // namespace pceperf::robustness

#endif  // PCEPERF_ROBUSTNESS_HPP
