#include "pceperf/robustness.hpp"

#include <cmath>
#include <future>

#include <fmt/format.h>

#include "pceperf/error.hpp"
#include "pceperf/random.hpp"

namespace pceperf::robustness {

double cov(double mean, double sd) {
  if (!(sd >= 0.0)) throw Error(ErrorCode::Domain, "standard deviation must be non-negative");
  if (!(std::abs(mean) > 1e-12 * std::max(1.0, sd))) {
    throw Error(ErrorCode::Degenerate,
                fmt::format("coefficient of variation undefined for mean {} (sd {})", mean, sd));
  }
  return 100.0 * sd / std::abs(mean);
}

RobustnessReport robustness_report(const pce::PceModel& model, const std::string& index_name) {
  const auto mom = pce::moments(model);
  return {index_name, mom.mean, mom.sd, cov(mom.mean, mom.sd), model.basis.degree(),
          pce::to_string(model.fit_method)};
}

LooReport loo_error(const pce::BasisSet& basis, const Eigen::Ref<const Eigen::MatrixXd>& samples,
                    const Eigen::Ref<const Eigen::VectorXd>& outputs) {
  const auto n = samples.rows();
  const auto p = static_cast<Eigen::Index>(basis.size());
  if (outputs.size() != n) throw Error(ErrorCode::Domain, "sample and output counts differ");
  if (n <= p) {
    throw Error(ErrorCode::Underdetermined,
                fmt::format("leave-one-out needs more than {} samples (got {})", p, n));
  }

  const Eigen::MatrixXd a = basis.design_matrix(samples);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < p) {
    throw Error(ErrorCode::RankDeficient,
                fmt::format("design matrix is rank deficient: rank {} of {} columns", qr.rank(), p));
  }
  const Eigen::VectorXd coeffs = qr.solve(outputs);
  const Eigen::VectorXd residuals = outputs - a * coeffs;
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  const Eigen::VectorXd leverage = q.rowwise().squaredNorm();

  double numerator = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    double loo_residual = 0.0;
    if (leverage(k) > 1.0 - 1e-10) {
      // Refit without point k, minimum-norm when the reduced design is rank deficient.
      Eigen::MatrixXd reduced_a(n - 1, p);
      Eigen::VectorXd reduced_y(n - 1);
      for (Eigen::Index i = 0, r = 0; i < n; ++i) {
        if (i == k) continue;
        reduced_a.row(r) = a.row(i);
        reduced_y(r) = outputs(i);
        ++r;
      }
      const Eigen::VectorXd refit = reduced_a.completeOrthogonalDecomposition().solve(reduced_y);
      loo_residual = outputs(k) - a.row(k).dot(refit);
    } else {
      loo_residual = residuals(k) / (1.0 - leverage(k));
    }
    numerator += loo_residual * loo_residual;
  }

  const double mean = outputs.mean();
  const double denominator = (outputs.array() - mean).square().sum();
  const double scale = std::max(1.0, std::abs(mean));
  double loo = 0.0;
  if (denominator <= 1e-28 * static_cast<double>(n) * scale * scale) {
    if (residuals.cwiseAbs().maxCoeff() >= 1e-12 * scale) {
      throw Error(ErrorCode::Degenerate,
                  "leave-one-out error undefined: outputs have zero variance but the fit has residuals");
    }
  } else {
    loo = numerator / denominator;
  }
  return {basis.degree(), loo, static_cast<std::size_t>(n)};
}

double noise_sigma(const Eigen::Ref<const Eigen::VectorXd>& outputs, double ran) {
  if (!(ran > 0.0)) throw Error(ErrorCode::Domain, "relative added noise level must be > 0");
  if (outputs.size() == 0) throw Error(ErrorCode::Domain, "no outputs to perturb");
  const double mean = outputs.mean();
  if (!(std::abs(mean) > 1e-12 * outputs.cwiseAbs().maxCoeff()) || !std::isfinite(mean)) {
    throw Error(ErrorCode::Degenerate, "relative added noise undefined for a zero-mean response");
  }
  return std::abs(mean) / ran;
}

Eigen::VectorXd add_noise(const Eigen::Ref<const Eigen::VectorXd>& outputs, double ran,
                          std::uint64_t seed) {
  const double sigma = noise_sigma(outputs, ran);
  RandomStream stream(seed, 0);
  Eigen::VectorXd noisy(outputs.size());
  for (Eigen::Index k = 0; k < outputs.size(); ++k) noisy(k) = outputs(k) + sigma * stream.normal();
  return noisy;
}

std::vector<NoiseRow> noise_sweep(std::shared_ptr<const inputspace::ProblemSpec> spec,
                                  const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                  const Eigen::Ref<const Eigen::VectorXd>& outputs,
                                  const NoiseSpec& noise, unsigned d_max) {
  std::vector<NoiseRow> rows;
  rows.reserve(noise.ran_levels.size());
  for (std::size_t level = 0; level < noise.ran_levels.size(); ++level) {
    NoiseRow row{noise.ran_levels[level], std::nullopt, std::nullopt, {}};
    try {
      const auto noisy = add_noise(outputs, row.ran_level, derive_seed(noise.seed, level));
      const auto selection = pce::select_degree(spec, samples, noisy, d_max);
      row.best_degree = selection.best_degree;
      for (const auto& entry : selection.loo_by_degree)
        if (entry.degree == selection.best_degree) row.loo_error = entry.loo_error;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& samples) {
  const auto n = samples.size();
  if (n < 2) throw Error(ErrorCode::Domain, "density estimation needs at least two samples");
  const double mean = samples.mean();
  const double var = (samples.array() - mean).square().sum() / static_cast<double>(n - 1);
  const double scale = std::max(1.0, std::abs(mean));
  if (!(var > 1e-30 * scale * scale)) {
    throw Error(ErrorCode::Degenerate,
                fmt::format("samples have zero variance; the distribution is a point mass at {:.17g}", mean));
  }
  return 1.06 * std::sqrt(var) * std::pow(static_cast<double>(n), -0.2);
}

std::vector<double> kde_pdf(const Eigen::Ref<const Eigen::VectorXd>& samples,
                            const std::vector<double>& grid) {
  const double h = silverman_bandwidth(samples);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * M_PI));
  std::vector<double> density(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < samples.size(); ++k) {
      const double z = (grid[g] - samples(k)) / h;
      total += std::exp(-0.5 * z * z);
    }
    density[g] = total * norm;
  }
  return density;
}

}  // namespace pceperf::robustness
