#include "pceperf/pce.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "json_util.hpp"
#include "pceperf/error.hpp"
#include "pceperf/robustness.hpp"

namespace pceperf::pce {

unsigned total_degree(const MultiIndex& index) noexcept {
  return std::accumulate(index.begin(), index.end(), 0u);
}

std::size_t basis_size(std::size_t m, unsigned d) noexcept {
  // C(m + d, d) by the multiplicative formula with saturation.
  double r = 1.0;
  for (unsigned i = 1; i <= d; ++i) {
    r = r * static_cast<double>(m + i) / i;
    if (r > 1e18) return std::numeric_limits<std::size_t>::max();
  }
  return static_cast<std::size_t>(std::llround(r));
}

namespace {

void append_indices(std::size_t m, unsigned degree, std::vector<MultiIndex>& out) {
  MultiIndex current(m, 0);
  auto fill = [&](auto&& self, std::size_t dim, unsigned remaining) -> void {
    if (dim + 1 == m) {
      current[dim] = remaining;
      out.push_back(current);
      return;
    }
    for (unsigned k = remaining + 1; k-- > 0;) {
      current[dim] = k;
      self(self, dim + 1, remaining - k);
    }
  };
  fill(fill, 0, degree);
}

void check_point(const BasisSet& basis, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (static_cast<std::size_t>(x.size()) != basis.dimension()) {
    throw Error(ErrorCode::Domain, fmt::format("germ point has dimension {}, basis expects {}",
                                               x.size(), basis.dimension()));
  }
  for (std::size_t d = 0; d < basis.dimension(); ++d) {
    if (!basis.families()[d].in_support(x(d))) {
      throw Error(ErrorCode::Domain,
                  fmt::format("germ coordinate {} = {} outside the {} support", d, x(d),
                              basis.families()[d].name()));
    }
  }
}

}  // namespace

BasisSet::BasisSet(std::shared_ptr<const inputspace::ProblemSpec> spec, unsigned degree)
    : spec_(std::move(spec)), degree_(degree) {
  if (!spec_) throw Error(ErrorCode::Domain, "basis needs a problem spec");
  const std::size_t m = spec_->dimension();
  const std::size_t count = basis_size(m, degree);
  if (count > kMaxBasisSize) {
    throw Error(ErrorCode::SizeLimit,
                fmt::format("total-degree basis with m={} d={} has {} terms (limit {})", m, degree,
                            count, kMaxBasisSize));
  }
  if (degree > orthopoly::kMaxDegree) {
    throw Error(ErrorCode::UnsupportedDegree,
                fmt::format("degree {} exceeds the supported maximum {}", degree, orthopoly::kMaxDegree));
  }
  families_ = spec_->families();
  indices_.reserve(count);
  for (unsigned t = 0; t <= degree; ++t) append_indices(m, t, indices_);
}

double BasisSet::eval(std::size_t position, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  check_point(*this, x);
  const auto& idx = indices_.at(position);
  double value = 1.0;
  for (std::size_t d = 0; d < idx.size(); ++d) {
    if (idx[d] != 0) value *= orthopoly::evaluate_orthonormal(families_[d], idx[d], x(d));
  }
  return value;
}

Eigen::RowVectorXd BasisSet::eval_all(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  check_point(*this, x);
  const std::size_t m = dimension();
  std::vector<std::vector<double>> univariate(m);
  for (std::size_t d = 0; d < m; ++d) {
    orthopoly::evaluate_orthonormal_all(families_[d], degree_, x(d), univariate[d]);
  }
  Eigen::RowVectorXd out(indices_.size());
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    double value = 1.0;
    for (std::size_t d = 0; d < m; ++d) value *= univariate[d][indices_[j][d]];
    out(static_cast<Eigen::Index>(j)) = value;
  }
  return out;
}

Eigen::MatrixXd BasisSet::design_matrix(const Eigen::Ref<const Eigen::MatrixXd>& samples) const {
  Eigen::MatrixXd a(samples.rows(), static_cast<Eigen::Index>(size()));
  for (Eigen::Index k = 0; k < samples.rows(); ++k) a.row(k) = eval_all(samples.row(k));
  return a;
}

BasisSet total_degree_basis(std::shared_ptr<const inputspace::ProblemSpec> spec, unsigned d) {
  return BasisSet(std::move(spec), d);
}

std::string to_string(FitMethod method) {
  return method == FitMethod::Regression ? "regression" : "projection";
}

FitMethod fit_method_from_string(const std::string& text) {
  if (text == "regression") return FitMethod::Regression;
  if (text == "projection") return FitMethod::Projection;
  throw Error(ErrorCode::Config, fmt::format("unknown fit method '{}'", text));
}

PceModel fit_regression(const BasisSet& basis, const Eigen::Ref<const Eigen::MatrixXd>& samples,
                        const Eigen::Ref<const Eigen::VectorXd>& outputs) {
  const auto n = static_cast<std::size_t>(samples.rows());
  const std::size_t p = basis.size();
  if (static_cast<std::size_t>(outputs.size()) != n) {
    throw Error(ErrorCode::Domain, "sample and output counts differ");
  }
  if (n < p) {
    throw Error(ErrorCode::Underdetermined,
                fmt::format("regression needs at least {} samples for degree {} (got {})", p,
                            basis.degree(), n));
  }
  if (!outputs.allFinite()) throw Error(ErrorCode::Domain, "outputs contain non-finite values");

  PceModel model{basis, {}, FitMethod::Regression, std::nullopt, n, {}};
  if (n < 2 * p) {
    model.notes.push_back(
        fmt::format("only {} samples for {} basis terms (oversampling target is {})", n, p, 2 * p));
  }

  const Eigen::MatrixXd a = basis.design_matrix(samples);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  const auto rank = static_cast<std::size_t>(qr.rank());
  if (rank < p) {
    throw Error(ErrorCode::RankDeficient,
                fmt::format("design matrix is rank deficient: rank {} of {} columns ({} dependent)",
                            rank, p, p - rank));
  }
  const Eigen::VectorXd b = qr.solve(outputs);
  model.coefficients.assign(b.data(), b.data() + b.size());
  return model;
}

PceModel fit_projection(const BasisSet& basis, const quadrature::QuadratureRuleND& rule,
                        const std::vector<double>& values) {
  if (rule.dimension() != basis.dimension() || rule.families != basis.families()) {
    throw Error(ErrorCode::Domain, "quadrature rule families do not match the basis");
  }
  if (values.size() != rule.size()) {
    throw Error(ErrorCode::Domain, "value count does not match the quadrature node count");
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto row = basis.eval_all(rule.nodes.row(static_cast<Eigen::Index>(q)));
    b += (rule.weights[q] * values[q]) * row.transpose();
  }
  PceModel model{basis, {}, FitMethod::Projection, std::nullopt, rule.size(), {}};
  model.coefficients.assign(b.data(), b.data() + b.size());
  return model;
}

PceModel fit_projection(const BasisSet& basis, const quadrature::QuadratureRuleND& rule,
                        const quadrature::PointFunction& evaluator) {
  std::vector<double> values(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    try {
      values[q] = evaluator(rule.nodes.row(static_cast<Eigen::Index>(q)));
    } catch (const EvaluationError&) {
      throw;
    } catch (const std::exception& e) {
      throw EvaluationError(q, e.what());
    }
  }
  return fit_projection(basis, rule, values);
}

double predict(const PceModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const auto row = model.basis.eval_all(x);
  double total = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) total += model.coefficients[static_cast<std::size_t>(j)] * row(j);
  return total;
}

Eigen::VectorXd predict_all(const PceModel& model, const Eigen::Ref<const Eigen::MatrixXd>& points) {
  Eigen::VectorXd out(points.rows());
  for (Eigen::Index k = 0; k < points.rows(); ++k) out(k) = predict(model, points.row(k));
  return out;
}

MomentReport moments(const PceModel& model) {
  const auto& b = model.coefficients;
  double tail = 0.0;
  for (std::size_t i = 1; i < b.size(); ++i) tail += b[i] * b[i];
  const double mean = b.empty() ? 0.0 : b[0];
  return {mean, mean * mean + tail, tail, std::sqrt(tail)};
}

DegreeSelection select_degree(std::shared_ptr<const inputspace::ProblemSpec> spec,
                              const Eigen::Ref<const Eigen::MatrixXd>& samples,
                              const Eigen::Ref<const Eigen::VectorXd>& outputs, unsigned d_max) {
  const auto n = static_cast<std::size_t>(samples.rows());
  const std::size_t m = spec->dimension();
  DegreeSelection result{0, {}, {}};
  std::optional<double> best;
  for (unsigned d = 1; d <= d_max; ++d) {
    const std::size_t p = basis_size(m, d);
    if (p >= n) {
      result.notes.push_back(
          fmt::format("degree {} skipped: {} basis terms need more than {} samples", d, p, n));
      continue;
    }
    try {
      const BasisSet basis(spec, d);
      const auto loo = robustness::loo_error(basis, samples, outputs);
      result.loo_by_degree.push_back({d, loo.loo_error, n});
      if (!best || loo.loo_error < *best - 1e-12) {
        best = loo.loo_error;
        result.best_degree = d;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Degenerate) throw;
      result.notes.push_back(fmt::format("degree {} skipped: {}", d, e.what()));
    }
  }
  if (!best) {
    throw Error(ErrorCode::InsufficientSamples,
                fmt::format("no feasible degree in 1..{} for {} samples in dimension {}", d_max, n, m));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const PceModel& model) {
  nlohmann::json indices = nlohmann::json::array();
  for (const auto& idx : model.basis.indices()) indices.push_back(idx);
  nlohmann::json doc = {
      {"format", kModelFormatName},
      {"version", kModelFormatVersion},
      {"problem", inputspace::to_json(model.basis.spec())},
      {"degree", model.basis.degree()},
      {"index_order", "graded-lexicographic"},
      {"indices", indices},
      {"coefficients", model.coefficients},
      {"fit", {{"method", to_string(model.fit_method)}}},
  };
  if (model.loo_error) doc["fit"]["loo_error"] = *model.loo_error;
  if (model.sample_count) doc["fit"]["sample_count"] = *model.sample_count;
  if (!model.notes.empty()) doc["fit"]["notes"] = model.notes;
  return doc;
}

PceModel model_from_json(const nlohmann::json& doc) {
  auto corrupt = [](const std::string& what) -> Error {
    return Error(ErrorCode::Parse, "model file: " + what);
  };
  if (!doc.is_object() || doc.value("format", "") != kModelFormatName) {
    throw corrupt("not a pceperf model document");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer()) throw corrupt("missing version");
  if (doc["version"].get<int>() != kModelFormatVersion) {
    throw Error(ErrorCode::Version, fmt::format("unsupported model format version {} (expected {})",
                                                doc["version"].get<int>(), kModelFormatVersion));
  }
  try {
    auto spec = std::make_shared<const inputspace::ProblemSpec>(
        inputspace::problem_from_json(doc.at("problem")));
    const auto degree = doc.at("degree").get<unsigned>();
    BasisSet basis(spec, degree);
    const auto indices = doc.at("indices").get<std::vector<MultiIndex>>();
    if (indices != basis.indices()) throw corrupt("index list does not match the total-degree basis");
    auto coefficients = doc.at("coefficients").get<std::vector<double>>();
    if (coefficients.size() != basis.size()) throw corrupt("coefficient count does not match the basis");
    const auto& fit = doc.at("fit");
    PceModel model{std::move(basis), std::move(coefficients),
                   fit_method_from_string(fit.at("method").get<std::string>()), std::nullopt,
                   std::nullopt, {}};
    if (fit.contains("loo_error")) model.loo_error = fit["loo_error"].get<double>();
    if (fit.contains("sample_count")) model.sample_count = fit["sample_count"].get<std::size_t>();
    if (fit.contains("notes")) model.notes = fit["notes"].get<std::vector<std::string>>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse || e.code() == ErrorCode::Version) throw;
    throw corrupt(e.what());
  }
}

std::string serialize(const PceModel& model) { return to_json(model).dump(2) + "\n"; }

PceModel deserialize(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, fmt::format("model file: {}", e.what()));
  }
  return model_from_json(doc);
}

}  // namespace pceperf::pce
