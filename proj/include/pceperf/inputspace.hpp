#ifndef PCEPERF_INPUTSPACE_HPP
#define PCEPERF_INPUTSPACE_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "pceperf/orthopoly.hpp"
#include "pceperf/random.hpp"

namespace pceperf::inputspace {

struct Normal {
  double mu;
  double sigma;
};
struct Uniform {
  double lo;
  double hi;
};
/// Beta(alpha, beta) rescaled from [0, 1] onto [lo, hi].
struct Beta {
  double alpha;
  double beta;
  double lo;
  double hi;
};
struct Exponential {
  double rate;
};
struct Gamma {
  double shape;
  double scale;
};
struct Triangular {
  double lo;
  double hi;
  double mode;
};
/// Finite distribution; quantiles follow the listed order of `values`.
struct Discrete {
  std::vector<double> values;
  std::vector<double> probs;
};

using DistributionSpec =
    std::variant<Normal, Uniform, Beta, Exponential, Gamma, Triangular, Discrete>;

/// Throws Error(Config) describing the first violated invariant.
void validate(const DistributionSpec& dist);

std::string distribution_name(const DistributionSpec& dist);

struct Affine {
  double offset;
  double scale;
};
struct InverseCdf {};

struct GermMap {
  orthopoly::PolynomialFamily family;
  std::variant<Affine, InverseCdf> transform;
};

struct InputParameter {
  std::string name;
  DistributionSpec dist;
};

/// Ordered, mutually independent uncertain inputs.
class ProblemSpec {
 public:
  explicit ProblemSpec(std::vector<InputParameter> params);

  std::size_t dimension() const noexcept { return params_.size(); }
  const std::vector<InputParameter>& params() const noexcept { return params_; }
  const InputParameter& param(std::size_t i) const { return params_.at(i); }
  /// Index of the parameter called `name`, or dimension() if absent.
  std::size_t find(const std::string& name) const noexcept;

  const std::vector<GermMap>& germs() const noexcept { return germs_; }
  std::vector<orthopoly::PolynomialFamily> families() const;

 private:
  std::vector<InputParameter> params_;
  std::vector<GermMap> germs_;
};

/// Askey-scheme germ and transform for a distribution. Triangular and
/// Discrete inputs get a Legendre germ with an inverse-CDF transform.
GermMap germ_for(const DistributionSpec& dist);

/// Generalized inverse CDF at u in [0, 1].
double quantile(const DistributionSpec& dist, double u);

/// CDF at x.
double cdf(const DistributionSpec& dist, double x);

/// Maps a germ value of the parameter's germ family onto its physical value.
double to_physical(const InputParameter& param, double germ_value);

/// Same as to_physical but reuses a precomputed GermMap.
double to_physical(const InputParameter& param, const GermMap& germ, double germ_value);

/// Physical row of a germ point.
Eigen::RowVectorXd to_physical(const ProblemSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& germ);

/// Germ value drawn by inversion of a uniform in (0, 1).
double germ_from_uniform(const orthopoly::PolynomialFamily& family, double u);

/// n x m germ matrix. Column j is drawn from stream (seed, j), so row k is
/// the same for every n > k.
Eigen::MatrixXd sample_germ(const ProblemSpec& spec, std::size_t n, std::uint64_t seed);

/// n x m physical matrix, same streams as sample_germ.
Eigen::MatrixXd sample_physical(const ProblemSpec& spec, std::size_t n, std::uint64_t seed);

/// Incremental form of sample_germ: successive calls to next() return the rows
/// of sample_germ(spec, n, seed) in order.
class GermSampler {
 public:
  GermSampler(const ProblemSpec& spec, std::uint64_t seed);
  Eigen::RowVectorXd next();

 private:
  std::vector<orthopoly::PolynomialFamily> families_;
  std::vector<RandomStream> streams_;
};

// JSON blocks, e.g. {"name": "users", "dist": {"type": "uniform", "lo": 49, "hi": 98}}.
// Errors name the offending field path below `path`.
nlohmann::json to_json(const DistributionSpec& dist);
DistributionSpec distribution_from_json(const nlohmann::json& doc, const std::string& path);
nlohmann::json to_json(const ProblemSpec& spec);
ProblemSpec problem_from_json(const nlohmann::json& doc, const std::string& path = "problem");

}  // namespace pceperf::inputspace

#endif  // PCEPERF_INPUTSPACE_HPP
