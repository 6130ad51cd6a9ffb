#include "pceperf/inputspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "json_util.hpp"
#include "pceperf/error.hpp"
#include "pceperf/special.hpp"

namespace pceperf::inputspace {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::Config, what); }

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void validate(const DistributionSpec& dist) {
  std::visit(overloaded{
                 [](const Normal& d) {
                   if (!finite(d.mu)) invalid("normal: mu must be finite");
                   if (!(d.sigma > 0.0) || !finite(d.sigma)) invalid("normal: sigma must be > 0");
                 },
                 [](const Uniform& d) {
                   if (!finite(d.lo) || !finite(d.hi) || !(d.hi > d.lo))
                     invalid("uniform: requires finite lo < hi");
                 },
                 [](const Beta& d) {
                   if (!(d.alpha > 0.0) || !(d.beta > 0.0))
                     invalid("beta: alpha and beta must be > 0");
                   if (!finite(d.lo) || !finite(d.hi) || !(d.hi > d.lo))
                     invalid("beta: requires finite lo < hi");
                 },
                 [](const Exponential& d) {
                   if (!(d.rate > 0.0) || !finite(d.rate)) invalid("exponential: rate must be > 0");
                 },
                 [](const Gamma& d) {
                   if (!(d.shape > 0.0) || !finite(d.shape)) invalid("gamma: shape must be > 0");
                   if (!(d.scale > 0.0) || !finite(d.scale)) invalid("gamma: scale must be > 0");
                 },
                 [](const Triangular& d) {
                   if (!finite(d.lo) || !finite(d.hi) || !(d.hi > d.lo))
                     invalid("triangular: requires finite lo < hi");
                   if (!(d.mode >= d.lo && d.mode <= d.hi))
                     invalid("triangular: mode must lie in [lo, hi]");
                 },
                 [](const Discrete& d) {
                   if (d.values.empty()) invalid("discrete: needs at least one value");
                   if (d.values.size() != d.probs.size())
                     invalid("discrete: values and probs must have the same length");
                   double total = 0.0;
                   for (std::size_t i = 0; i < d.probs.size(); ++i) {
                     if (!finite(d.values[i])) invalid("discrete: values must be finite");
                     if (!(d.probs[i] > 0.0)) invalid("discrete: probs must be > 0");
                     total += d.probs[i];
                   }
                   if (std::abs(total - 1.0) > 1e-9)
                     invalid(fmt::format("discrete: probs sum to {:.17g}, expected 1", total));
                 },
             },
             dist);
}

std::string distribution_name(const DistributionSpec& dist) {
  return std::visit(overloaded{
                        [](const Normal&) { return std::string("normal"); },
                        [](const Uniform&) { return std::string("uniform"); },
                        [](const Beta&) { return std::string("beta"); },
                        [](const Exponential&) { return std::string("exponential"); },
                        [](const Gamma&) { return std::string("gamma"); },
                        [](const Triangular&) { return std::string("triangular"); },
                        [](const Discrete&) { return std::string("discrete"); },
                    },
                    dist);
}

GermMap germ_for(const DistributionSpec& dist) {
  using orthopoly::PolynomialFamily;
  return std::visit(
      overloaded{
          [](const Normal& d) {
            return GermMap{PolynomialFamily::hermite(), Affine{d.mu, d.sigma}};
          },
          [](const Uniform& d) {
            return GermMap{PolynomialFamily::legendre(),
                           Affine{0.5 * (d.lo + d.hi), 0.5 * (d.hi - d.lo)}};
          },
          // Jacobi weight (1-x)^a (1+x)^b: the (1+x) exponent carries alpha-1.
          [](const Beta& d) {
            return GermMap{PolynomialFamily::jacobi(d.beta - 1.0, d.alpha - 1.0),
                           Affine{0.5 * (d.lo + d.hi), 0.5 * (d.hi - d.lo)}};
          },
          [](const Exponential& d) {
            return GermMap{PolynomialFamily::laguerre(), Affine{0.0, 1.0 / d.rate}};
          },
          [](const Gamma& d) {
            return GermMap{PolynomialFamily::generalized_laguerre(d.shape - 1.0),
                           Affine{0.0, d.scale}};
          },
          [](const Triangular&) { return GermMap{PolynomialFamily::legendre(), InverseCdf{}}; },
          [](const Discrete&) { return GermMap{PolynomialFamily::legendre(), InverseCdf{}}; },
      },
      dist);
}

double quantile(const DistributionSpec& dist, double u) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw Error(ErrorCode::Domain, fmt::format("quantile level {} outside [0, 1]", u));
  }
  return std::visit(
      overloaded{
          [u](const Normal& d) { return d.mu + d.sigma * special::normal_quantile(u); },
          [u](const Uniform& d) { return std::lerp(d.lo, d.hi, u); },
          [u](const Beta& d) {
            double t = u;
            if (u > 0.0 && u < 1.0) t = boost::math::ibeta_inv(d.alpha, d.beta, u);
            return std::clamp(std::lerp(d.lo, d.hi, t), d.lo, d.hi);
          },
          [u](const Exponential& d) {
            if (u >= 1.0) return std::numeric_limits<double>::infinity();
            return -std::log1p(-u) / d.rate;
          },
          [u](const Gamma& d) {
            if (u <= 0.0) return 0.0;
            if (u >= 1.0) return std::numeric_limits<double>::infinity();
            return d.scale * boost::math::gamma_p_inv(d.shape, u);
          },
          [u](const Triangular& d) {
            const double width = d.hi - d.lo;
            const double split = (d.mode - d.lo) / width;
            if (u <= split) return d.lo + std::sqrt(u * width * (d.mode - d.lo));
            return d.hi - std::sqrt((1.0 - u) * width * (d.hi - d.mode));
          },
          [u](const Discrete& d) {
            double cumulative = 0.0;
            for (std::size_t i = 0; i + 1 < d.values.size(); ++i) {
              cumulative += d.probs[i];
              if (cumulative >= u) return d.values[i];
            }
            return d.values.back();
          },
      },
      dist);
}

double cdf(const DistributionSpec& dist, double x) {
  return std::visit(
      overloaded{
          [x](const Normal& d) { return special::normal_cdf((x - d.mu) / d.sigma); },
          [x](const Uniform& d) { return std::clamp((x - d.lo) / (d.hi - d.lo), 0.0, 1.0); },
          [x](const Beta& d) {
            const double t = (x - d.lo) / (d.hi - d.lo);
            if (t <= 0.0) return 0.0;
            if (t >= 1.0) return 1.0;
            return boost::math::ibeta(d.alpha, d.beta, t);
          },
          [x](const Exponential& d) { return x <= 0.0 ? 0.0 : -std::expm1(-d.rate * x); },
          [x](const Gamma& d) {
            return x <= 0.0 ? 0.0 : boost::math::gamma_p(d.shape, x / d.scale);
          },
          [x](const Triangular& d) {
            if (x <= d.lo) return 0.0;
            if (x >= d.hi) return 1.0;
            const double width = d.hi - d.lo;
            if (x <= d.mode) return (x - d.lo) * (x - d.lo) / (width * (d.mode - d.lo));
            return 1.0 - (d.hi - x) * (d.hi - x) / (width * (d.hi - d.mode));
          },
          [x](const Discrete& d) {
            double total = 0.0;
            for (std::size_t i = 0; i < d.values.size(); ++i)
              if (d.values[i] <= x) total += d.probs[i];
            return std::min(total, 1.0);
          },
      },
      dist);
}

ProblemSpec::ProblemSpec(std::vector<InputParameter> params) : params_(std::move(params)) {
  if (params_.empty()) {
    throw Error(ErrorCode::Config, "a problem needs at least one uncertain parameter");
  }
  std::set<std::string> names;
  for (const auto& p : params_) {
    if (p.name.empty()) throw Error(ErrorCode::Config, "parameter names must be non-empty");
    if (!names.insert(p.name).second) {
      throw Error(ErrorCode::Config, fmt::format("duplicate parameter name '{}'", p.name));
    }
    validate(p.dist);
    germs_.push_back(germ_for(p.dist));
  }
}

std::size_t ProblemSpec::find(const std::string& name) const noexcept {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  return params_.size();
}

std::vector<orthopoly::PolynomialFamily> ProblemSpec::families() const {
  std::vector<orthopoly::PolynomialFamily> out;
  out.reserve(germs_.size());
  for (const auto& g : germs_) out.push_back(g.family);
  return out;
}

double to_physical(const InputParameter& param, const GermMap& germ, double xi) {
  if (!germ.family.in_support(xi)) {
    throw Error(ErrorCode::Domain,
                fmt::format("germ value {} outside the {} support of parameter '{}'", xi,
                            germ.family.name(), param.name));
  }
  if (std::holds_alternative<InverseCdf>(germ.transform)) {
    return quantile(param.dist, std::clamp(0.5 * (xi + 1.0), 0.0, 1.0));
  }
  // Bounded supports interpolate so that germ endpoints land exactly on the
  // physical endpoints.
  if (const auto* u = std::get_if<Uniform>(&param.dist)) {
    return std::lerp(u->lo, u->hi, 0.5 * (xi + 1.0));
  }
  if (const auto* b = std::get_if<Beta>(&param.dist)) {
    return std::clamp(std::lerp(b->lo, b->hi, 0.5 * (xi + 1.0)), b->lo, b->hi);
  }
  const auto& affine = std::get<Affine>(germ.transform);
  return affine.offset + affine.scale * xi;
}

double to_physical(const InputParameter& param, double germ_value) {
  return to_physical(param, germ_for(param.dist), germ_value);
}

Eigen::RowVectorXd to_physical(const ProblemSpec& spec,
                               const Eigen::Ref<const Eigen::RowVectorXd>& germ) {
  Eigen::RowVectorXd out(spec.dimension());
  for (std::size_t j = 0; j < spec.dimension(); ++j) {
    out(j) = to_physical(spec.param(j), spec.germs()[j], germ(j));
  }
  return out;
}

double germ_from_uniform(const orthopoly::PolynomialFamily& family, double u) {
  using orthopoly::FamilyKind;
  switch (family.kind()) {
    case FamilyKind::Hermite:
      return special::normal_quantile(u);
    case FamilyKind::Legendre:
      return 2.0 * u - 1.0;
    case FamilyKind::Jacobi:
      return 2.0 * boost::math::ibeta_inv(family.beta() + 1.0, family.alpha() + 1.0, u) - 1.0;
    case FamilyKind::Laguerre:
      return -std::log1p(-u);
    case FamilyKind::GeneralizedLaguerre:
      return boost::math::gamma_p_inv(family.alpha() + 1.0, u);
  }
  return 0.0;
}

GermSampler::GermSampler(const ProblemSpec& spec, std::uint64_t seed) : families_(spec.families()) {
  streams_.reserve(families_.size());
  for (std::size_t j = 0; j < families_.size(); ++j) streams_.emplace_back(seed, j);
}

Eigen::RowVectorXd GermSampler::next() {
  Eigen::RowVectorXd row(families_.size());
  for (std::size_t j = 0; j < families_.size(); ++j) {
    row(j) = germ_from_uniform(families_[j], streams_[j].uniform());
  }
  return row;
}

Eigen::MatrixXd sample_germ(const ProblemSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::Domain, "sample count must be at least 1");
  Eigen::MatrixXd out(n, spec.dimension());
  GermSampler sampler(spec, seed);
  for (std::size_t k = 0; k < n; ++k) out.row(k) = sampler.next();
  return out;
}

Eigen::MatrixXd sample_physical(const ProblemSpec& spec, std::size_t n, std::uint64_t seed) {
  Eigen::MatrixXd germ = sample_germ(spec, n, seed);
  Eigen::MatrixXd out(n, spec.dimension());
  for (std::size_t k = 0; k < n; ++k) out.row(k) = to_physical(spec, germ.row(k));
  return out;
}

}  // namespace pceperf::inputspace

// ---------------------------------------------------------------------------
// JSON blocks

namespace pceperf::inputspace {

nlohmann::json to_json(const DistributionSpec& dist) {
  using nlohmann::json;
  return std::visit(
      overloaded{
          [](const Normal& d) { return json{{"type", "normal"}, {"mu", d.mu}, {"sigma", d.sigma}}; },
          [](const Uniform& d) { return json{{"type", "uniform"}, {"lo", d.lo}, {"hi", d.hi}}; },
          [](const Beta& d) {
            return json{{"type", "beta"}, {"alpha", d.alpha}, {"beta", d.beta}, {"lo", d.lo}, {"hi", d.hi}};
          },
          [](const Exponential& d) { return json{{"type", "exponential"}, {"rate", d.rate}}; },
          [](const Gamma& d) { return json{{"type", "gamma"}, {"shape", d.shape}, {"scale", d.scale}}; },
          [](const Triangular& d) {
            return json{{"type", "triangular"}, {"lo", d.lo}, {"hi", d.hi}, {"mode", d.mode}};
          },
          [](const Discrete& d) { return json{{"type", "discrete"}, {"values", d.values}, {"probs", d.probs}}; },
      },
      dist);
}

DistributionSpec distribution_from_json(const nlohmann::json& doc, const std::string& path) {
  using detail::require_number;
  const std::string type = detail::require_string(doc, "type", path);
  DistributionSpec dist;
  if (type == "normal") {
    dist = Normal{require_number(doc, "mu", path), require_number(doc, "sigma", path)};
  } else if (type == "uniform") {
    dist = Uniform{require_number(doc, "lo", path), require_number(doc, "hi", path)};
  } else if (type == "beta") {
    dist = Beta{require_number(doc, "alpha", path), require_number(doc, "beta", path),
                require_number(doc, "lo", path), require_number(doc, "hi", path)};
  } else if (type == "exponential") {
    dist = Exponential{require_number(doc, "rate", path)};
  } else if (type == "gamma") {
    dist = Gamma{require_number(doc, "shape", path), require_number(doc, "scale", path)};
  } else if (type == "triangular") {
    dist = Triangular{require_number(doc, "lo", path), require_number(doc, "hi", path),
                      require_number(doc, "mode", path)};
  } else if (type == "discrete") {
    dist = Discrete{detail::require_number_list(doc, "values", path),
                    detail::require_number_list(doc, "probs", path)};
  } else {
    detail::bad_field(path + ".type", fmt::format("unknown distribution type '{}'", type));
  }
  try {
    validate(dist);
  } catch (const Error& e) {
    detail::bad_field(path, e.what());
  }
  return dist;
}

nlohmann::json to_json(const ProblemSpec& spec) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : spec.params()) params.push_back({{"name", p.name}, {"dist", to_json(p.dist)}});
  return {{"params", params}};
}

ProblemSpec problem_from_json(const nlohmann::json& doc, const std::string& path) {
  const auto& params = detail::require(doc, "params", path);
  if (!params.is_array() || params.empty()) {
    detail::bad_field(path + ".params", "expected a non-empty array of parameters");
  }
  std::vector<InputParameter> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string p = fmt::format("{}.params[{}]", path, i);
    InputParameter param{detail::require_string(params[i], "name", p),
                         distribution_from_json(detail::require(params[i], "dist", p), p + ".dist")};
    out.push_back(std::move(param));
  }
  try {
    return ProblemSpec(std::move(out));
  } catch (const Error& e) {
    detail::bad_field(path + ".params", e.what());
  }
}

}  // namespace pceperf::inputspace
