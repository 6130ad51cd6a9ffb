#ifndef PCEPERF_PCE_HPP
#define PCEPERF_PCE_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "pceperf/inputspace.hpp"
#include "pceperf/quadrature.hpp"

namespace pceperf::pce {

inline constexpr std::size_t kMaxBasisSize = 1'000'000;

using MultiIndex = std::vector<unsigned>;

unsigned total_degree(const MultiIndex& index) noexcept;

/// Number of multi-indices of total degree <= d in m variables, C(m+d, d).
/// Saturates at SIZE_MAX.
std::size_t basis_size(std::size_t m, unsigned d) noexcept;

/// Total-degree basis of orthonormal tensor-product polynomials.
///
/// Indices are in graded lexicographic order: ascending total degree, and
/// within one degree, descending in the first entry, then the second, and so
/// on. For m = 2, d = 2: (0,0) (1,0) (0,1) (2,0) (1,1) (0,2).
class BasisSet {
 public:
  BasisSet(std::shared_ptr<const inputspace::ProblemSpec> spec, unsigned degree);

  const inputspace::ProblemSpec& spec() const noexcept { return *spec_; }
  std::shared_ptr<const inputspace::ProblemSpec> spec_ptr() const noexcept { return spec_; }
  unsigned degree() const noexcept { return degree_; }
  std::size_t dimension() const noexcept { return spec_->dimension(); }
  std::size_t size() const noexcept { return indices_.size(); }
  const std::vector<MultiIndex>& indices() const noexcept { return indices_; }
  const std::vector<orthopoly::PolynomialFamily>& families() const noexcept { return families_; }

  /// Psi_j at a germ point.
  double eval(std::size_t position, const Eigen::Ref<const Eigen::RowVectorXd>& germ_point) const;

  /// All basis values at a germ point.
  Eigen::RowVectorXd eval_all(const Eigen::Ref<const Eigen::RowVectorXd>& germ_point) const;

  /// n x P design matrix over the rows of `germ_samples`.
  Eigen::MatrixXd design_matrix(const Eigen::Ref<const Eigen::MatrixXd>& germ_samples) const;

 private:
  std::shared_ptr<const inputspace::ProblemSpec> spec_;
  std::vector<orthopoly::PolynomialFamily> families_;
  unsigned degree_;
  std::vector<MultiIndex> indices_;
};

BasisSet total_degree_basis(std::shared_ptr<const inputspace::ProblemSpec> spec, unsigned d);

enum class FitMethod { Regression, Projection };
std::string to_string(FitMethod method);
FitMethod fit_method_from_string(const std::string& text);

/// Fitted expansion. Coefficients are in the orthonormal convention, so the
/// mean is b_0 and the second moment is sum b_i^2.
struct PceModel {
  BasisSet basis;
  std::vector<double> coefficients;
  FitMethod fit_method = FitMethod::Regression;
  std::optional<double> loo_error;
  std::optional<std::size_t> sample_count;
  std::vector<std::string> notes;
};

struct MomentReport {
  double mean;
  double second_moment;
  double variance;
  double sd;
};

/// Least-squares fit with column-pivoted Householder QR.
PceModel fit_regression(const BasisSet& basis, const Eigen::Ref<const Eigen::MatrixXd>& germ_samples,
                        const Eigen::Ref<const Eigen::VectorXd>& outputs);

/// Spectral projection b_j = sum_q w_q Psi_j(x_q) f(x_q).
PceModel fit_projection(const BasisSet& basis, const quadrature::QuadratureRuleND& rule,
                        const quadrature::PointFunction& evaluator);

/// Projection from values already evaluated at the rule's nodes.
PceModel fit_projection(const BasisSet& basis, const quadrature::QuadratureRuleND& rule,
                        const std::vector<double>& node_values);

double predict(const PceModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& germ_point);
Eigen::VectorXd predict_all(const PceModel& model, const Eigen::Ref<const Eigen::MatrixXd>& germ_points);

MomentReport moments(const PceModel& model);

struct DegreeLoo {
  unsigned degree;
  double loo_error;
  std::size_t sample_count;
};

struct DegreeSelection {
  unsigned best_degree;
  std::vector<DegreeLoo> loo_by_degree;
  std::vector<std::string> notes;  // skipped degrees and per-degree failures
};

/// Sweeps degrees 1..d_max, skipping degrees whose basis exceeds the sample
/// count, and returns the degree with the smallest leave-one-out error (ties
/// within 1e-12 go to the smaller degree).
DegreeSelection select_degree(std::shared_ptr<const inputspace::ProblemSpec> spec,
                              const Eigen::Ref<const Eigen::MatrixXd>& germ_samples,
                              const Eigen::Ref<const Eigen::VectorXd>& outputs,
                              unsigned d_max = 30);

// Serialization: versioned JSON document.
inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatName = "pceperf-model";

nlohmann::json to_json(const PceModel& model);
PceModel model_from_json(const nlohmann::json& doc);

std::string serialize(const PceModel& model);
PceModel deserialize(const std::string& text);

}  // namespace pceperf::pce

#endif  // PCEPERF_PCE_HPP
