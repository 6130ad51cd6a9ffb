#ifndef PCEPERF_TESTS_SUPPORT_HPP
#define PCEPERF_TESTS_SUPPORT_HPP

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "doctest.h"
#include "pceperf/error.hpp"
#include "pceperf/inputspace.hpp"
#include "pceperf/orthopoly.hpp"

namespace testing {

template <class F>
std::optional<pceperf::ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const pceperf::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::shared_ptr<const pceperf::inputspace::ProblemSpec> spec_of(
    std::vector<pceperf::inputspace::DistributionSpec> dists) {
  std::vector<pceperf::inputspace::InputParameter> params;
  for (std::size_t i = 0; i < dists.size(); ++i) params.push_back({"x" + std::to_string(i), dists[i]});
  return std::make_shared<const pceperf::inputspace::ProblemSpec>(std::move(params));
}

inline std::shared_ptr<const pceperf::inputspace::ProblemSpec> standard_normals(std::size_t m) {
  return spec_of(std::vector<pceperf::inputspace::DistributionSpec>(m, pceperf::inputspace::Normal{0.0, 1.0}));
}

inline std::shared_ptr<const pceperf::inputspace::ProblemSpec> standard_uniforms(std::size_t m) {
  return spec_of(std::vector<pceperf::inputspace::DistributionSpec>(m, pceperf::inputspace::Uniform{-1.0, 1.0}));
}

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

inline double double_factorial(int k) {
  double r = 1.0;
  for (int i = k; i > 1; i -= 2) r *= i;
  return r;
}

// E[x^k] under each germ density, from Beta/Gamma integrals.
inline double moment(const pceperf::orthopoly::PolynomialFamily& f, int k) {
  switch (f.kind()) {
    case pceperf::orthopoly::FamilyKind::Hermite:
      return k % 2 ? 0.0 : double_factorial(k - 1);
    case pceperf::orthopoly::FamilyKind::Legendre:
      return k % 2 ? 0.0 : 1.0 / (k + 1);
    case pceperf::orthopoly::FamilyKind::Laguerre:
      return std::tgamma(k + 1.0);
    case pceperf::orthopoly::FamilyKind::GeneralizedLaguerre:
      return std::exp(std::lgamma(f.alpha() + 1.0 + k) - std::lgamma(f.alpha() + 1.0));
    case pceperf::orthopoly::FamilyKind::Jacobi: {
      // x = 2t - 1 with t ~ Beta(beta + 1, alpha + 1).
      // The alternating binomial sum cancels heavily; accumulate in long double.
      const long double p = f.beta() + 1.0, q = f.alpha() + 1.0;
      long double total = 0.0L, binom = 1.0L;
      for (int j = 0; j <= k; ++j) {
        long double et = 1.0L;
        for (int i = 0; i < j; ++i) et *= (p + i) / (p + q + i);
        total += binom * std::pow(2.0L, j) * ((k - j) % 2 ? -1.0L : 1.0L) * et;
        binom = binom * (k - j) / (j + 1);
      }
      return static_cast<double>(total);
    }
  }
  return NAN;
}

}  // namespace testing

#define CHECK_ERROR(expr, expected_code) \
  CHECK(testing::error_code_of([&] { (void)(expr); }) == std::optional<pceperf::ErrorCode>(expected_code))

#endif  // PCEPERF_TESTS_SUPPORT_HPP
