#include "pceperf/orthopoly.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "pceperf/error.hpp"

namespace pceperf::orthopoly {

namespace {

void check_degree(unsigned degree) {
  if (degree > kMaxDegree) {
    throw Error(ErrorCode::UnsupportedDegree,
                fmt::format("polynomial degree {} exceeds the supported maximum {}", degree,
                            kMaxDegree));
  }
}

double log_gamma(double x) { return std::lgamma(x); }

}  // namespace

PolynomialFamily PolynomialFamily::jacobi(double alpha, double beta) {
  if (!(alpha > -1.0) || !(beta > -1.0)) {
    throw Error(ErrorCode::Domain,
                fmt::format("Jacobi shape parameters must exceed -1 (got {}, {})", alpha, beta));
  }
  return {FamilyKind::Jacobi, alpha, beta};
}

PolynomialFamily PolynomialFamily::generalized_laguerre(double alpha) {
  if (!(alpha > -1.0)) {
    throw Error(ErrorCode::Domain,
                fmt::format("generalized Laguerre shape must exceed -1 (got {})", alpha));
  }
  return {FamilyKind::GeneralizedLaguerre, alpha, 0.0};
}

bool PolynomialFamily::symmetric() const noexcept {
  switch (kind_) {
    case FamilyKind::Hermite:
    case FamilyKind::Legendre:
      return true;
    case FamilyKind::Jacobi:
      return alpha_ == beta_;
    default:
      return false;
  }
}

double PolynomialFamily::support_lower() const noexcept {
  switch (kind_) {
    case FamilyKind::Hermite:
      return -std::numeric_limits<double>::infinity();
    case FamilyKind::Legendre:
    case FamilyKind::Jacobi:
      return -1.0;
    default:
      return 0.0;
  }
}

double PolynomialFamily::support_upper() const noexcept {
  switch (kind_) {
    case FamilyKind::Legendre:
    case FamilyKind::Jacobi:
      return 1.0;
    default:
      return std::numeric_limits<double>::infinity();
  }
}

bool PolynomialFamily::in_support(double x) const noexcept {
  if (std::isnan(x)) return false;
  return x >= support_lower() && x <= support_upper();
}

double PolynomialFamily::density(double x) const {
  if (!in_support(x)) return 0.0;
  switch (kind_) {
    case FamilyKind::Hermite:
      return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    case FamilyKind::Legendre:
      return 0.5;
    case FamilyKind::Jacobi: {
      const double a = alpha_, b = beta_;
      const double log_norm = (a + b + 1.0) * std::log(2.0) + log_gamma(a + 1.0) +
                              log_gamma(b + 1.0) - log_gamma(a + b + 2.0);
      return std::pow(1.0 - x, a) * std::pow(1.0 + x, b) * std::exp(-log_norm);
    }
    case FamilyKind::Laguerre:
      return std::exp(-x);
    case FamilyKind::GeneralizedLaguerre:
      return std::exp(alpha_ * std::log(x) - x - log_gamma(alpha_ + 1.0));
  }
  return 0.0;
}

double PolynomialFamily::mean() const noexcept {
  switch (kind_) {
    case FamilyKind::Jacobi:
      return (beta_ - alpha_) / (alpha_ + beta_ + 2.0);
    case FamilyKind::Laguerre:
      return 1.0;
    case FamilyKind::GeneralizedLaguerre:
      return alpha_ + 1.0;
    default:
      return 0.0;
  }
}

std::string PolynomialFamily::name() const {
  switch (kind_) {
    case FamilyKind::Hermite:
      return "hermite";
    case FamilyKind::Legendre:
      return "legendre";
    case FamilyKind::Jacobi:
      return fmt::format("jacobi({},{})", alpha_, beta_);
    case FamilyKind::Laguerre:
      return "laguerre";
    case FamilyKind::GeneralizedLaguerre:
      return fmt::format("generalized_laguerre({})", alpha_);
  }
  return "unknown";
}

MonicRecurrence monic_recurrence(const PolynomialFamily& family, unsigned n) {
  const double dn = n;
  switch (family.kind()) {
    case FamilyKind::Hermite:
      return {0.0, n == 0 ? 1.0 : dn};
    case FamilyKind::Legendre:
      return {0.0, n == 0 ? 1.0 : dn * dn / (4.0 * dn * dn - 1.0)};
    case FamilyKind::Laguerre:
    case FamilyKind::GeneralizedLaguerre: {
      const double a = family.alpha();
      return {2.0 * dn + a + 1.0, n == 0 ? 1.0 : dn * (dn + a)};
    }
    case FamilyKind::Jacobi: {
      const double a = family.alpha(), b = family.beta();
      const double s = 2.0 * dn + a + b;
      double an = 0.0;
      if (n == 0) {
        an = (b - a) / (a + b + 2.0);
      } else {
        an = (b * b - a * a) / (s * (s + 2.0));
      }
      double bn = 1.0;
      if (n == 1) {
        bn = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b) * (2.0 + a + b) * (3.0 + a + b));
      } else if (n >= 2) {
        bn = 4.0 * dn * (dn + a) * (dn + b) * (dn + a + b) / (s * s * (s + 1.0) * (s - 1.0));
      }
      return {an, bn};
    }
  }
  return {0.0, 1.0};
}

double evaluate(const PolynomialFamily& family, unsigned degree, double point) {
  check_degree(degree);
  if (degree == 0) return 1.0;

  double prev = 1.0;
  double curr = 0.0;
  switch (family.kind()) {
    case FamilyKind::Hermite:
      curr = point;
      for (unsigned n = 1; n < degree; ++n) {
        const double next = point * curr - n * prev;
        prev = curr;
        curr = next;
      }
      return curr;
    case FamilyKind::Legendre:
      curr = point;
      for (unsigned n = 1; n < degree; ++n) {
        const double next = ((2.0 * n + 1.0) * point * curr - n * prev) / (n + 1.0);
        prev = curr;
        curr = next;
      }
      return curr;
    case FamilyKind::Laguerre:
    case FamilyKind::GeneralizedLaguerre: {
      const double a = family.alpha();
      curr = 1.0 + a - point;
      for (unsigned n = 1; n < degree; ++n) {
        const double next = ((2.0 * n + 1.0 + a - point) * curr - (n + a) * prev) / (n + 1.0);
        prev = curr;
        curr = next;
      }
      return curr;
    }
    case FamilyKind::Jacobi: {
      const double a = family.alpha(), b = family.beta();
      curr = (a + 1.0) + 0.5 * (a + b + 2.0) * (point - 1.0);
      for (unsigned n = 2; n <= degree; ++n) {
        const double dn = n;
        const double s = 2.0 * dn + a + b;
        const double c1 = 2.0 * dn * (dn + a + b) * (s - 2.0);
        const double c2 = (s - 1.0) * (s * (s - 2.0) * point + a * a - b * b);
        const double c3 = 2.0 * (dn + a - 1.0) * (dn + b - 1.0) * s;
        const double next = (c2 * curr - c3 * prev) / c1;
        prev = curr;
        curr = next;
      }
      return curr;
    }
  }
  return curr;
}

double norm_squared(const PolynomialFamily& family, unsigned degree) {
  check_degree(degree);
  if (degree == 0) return 1.0;
  const double n = degree;
  switch (family.kind()) {
    case FamilyKind::Hermite:
      return std::exp(log_gamma(n + 1.0));
    case FamilyKind::Legendre:
      return 1.0 / (2.0 * n + 1.0);
    case FamilyKind::Laguerre:
      return 1.0;
    case FamilyKind::GeneralizedLaguerre: {
      const double a = family.alpha();
      return std::exp(log_gamma(n + a + 1.0) - log_gamma(n + 1.0) - log_gamma(a + 1.0));
    }
    case FamilyKind::Jacobi: {
      const double a = family.alpha(), b = family.beta();
      const double log_ratio = log_gamma(n + a + 1.0) + log_gamma(n + b + 1.0) +
                               log_gamma(a + b + 2.0) - log_gamma(n + a + b + 1.0) -
                               log_gamma(n + 1.0) - log_gamma(a + 1.0) - log_gamma(b + 1.0);
      return std::exp(log_ratio) / (2.0 * n + a + b + 1.0);
    }
  }
  return 1.0;
}

double evaluate_orthonormal(const PolynomialFamily& family, unsigned degree, double point) {
  return evaluate(family, degree, point) / std::sqrt(norm_squared(family, degree));
}

void evaluate_orthonormal_all(const PolynomialFamily& family, unsigned max_degree, double point,
                              std::vector<double>& out) {
  check_degree(max_degree);
  out.resize(max_degree + 1);
  out[0] = 1.0;
  if (max_degree == 0) return;

  // Orthonormal recurrence built from the monic coefficients; avoids the
  // growth of the classical normalizations at high degree.
  double prev = 0.0;
  double curr = 1.0;
  double sqrt_b_curr = 1.0;  // sqrt(b_0)
  for (unsigned n = 0; n < max_degree; ++n) {
    const auto rn = monic_recurrence(family, n);
    const double sqrt_b_next = std::sqrt(monic_recurrence(family, n + 1).b);
    const double next = ((point - rn.a) * curr - (n == 0 ? 0.0 : sqrt_b_curr) * prev) / sqrt_b_next;
    prev = curr;
    curr = next;
    sqrt_b_curr = sqrt_b_next;
    out[n + 1] = curr;
  }
  // Classical Laguerre polynomials have leading coefficient (-1)^n / n!.
  if (family.kind() == FamilyKind::Laguerre || family.kind() == FamilyKind::GeneralizedLaguerre) {
    for (unsigned n = 1; n <= max_degree; n += 2) out[n] = -out[n];
  }
}

namespace {

// Orthonormal values p_0..p_{n-1}, plus p_n and its derivative, at x.
struct OrthonormalTail {
  double sum_sq_below;  // sum_{k<n} p_k(x)^2
  double p_n;
  double dp_n;
};

OrthonormalTail orthonormal_tail(const PolynomialFamily& family, unsigned n, double x) {
  double p_prev = 0.0, p_curr = 1.0;
  double d_prev = 0.0, d_curr = 0.0;
  double sum_sq = 0.0;
  double sqrt_b_curr = 1.0;
  for (unsigned k = 0; k < n; ++k) {
    sum_sq += p_curr * p_curr;
    const auto rk = monic_recurrence(family, k);
    const double sqrt_b_next = std::sqrt(monic_recurrence(family, k + 1).b);
    const double lag = k == 0 ? 0.0 : sqrt_b_curr;
    const double p_next = ((x - rk.a) * p_curr - lag * p_prev) / sqrt_b_next;
    const double d_next = (p_curr + (x - rk.a) * d_curr - lag * d_prev) / sqrt_b_next;
    p_prev = p_curr;
    p_curr = p_next;
    d_prev = d_curr;
    d_curr = d_next;
    sqrt_b_curr = sqrt_b_next;
  }
  return {sum_sq, p_curr, d_curr};
}

}  // namespace

QuadratureRule1D gauss_rule(const PolynomialFamily& family, unsigned points) {
  if (points == 0) {
    throw Error(ErrorCode::Domain, "a Gauss rule needs at least one point");
  }
  if (points > kMaxPoints) {
    throw Error(ErrorCode::UnsupportedDegree,
                fmt::format("Gauss rule with {} points exceeds the supported maximum {}", points,
                            kMaxPoints));
  }

  Eigen::VectorXd diag(points);
  Eigen::VectorXd sub(points > 1 ? points - 1 : 1);
  for (unsigned k = 0; k < points; ++k) {
    diag(k) = monic_recurrence(family, k).a;
    if (k + 1 < points) sub(k) = std::sqrt(monic_recurrence(family, k + 1).b);
  }
  std::vector<double> nodes(points);
  if (points == 1) {
    nodes[0] = diag(0);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub.head(points - 1), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorCode::Numerical,
                  fmt::format("Jacobi-matrix eigensolver failed for {} with {} points",
                              family.name(), points));
    }
    for (unsigned k = 0; k < points; ++k) nodes[k] = solver.eigenvalues()(k);
  }

  // Newton polish on p_n, bounded well inside the gap to the neighbours.
  for (unsigned k = 0; k < points && points > 1; ++k) {
    double gap = std::numeric_limits<double>::infinity();
    if (k > 0) gap = std::min(gap, nodes[k] - nodes[k - 1]);
    if (k + 1 < points) gap = std::min(gap, nodes[k + 1] - nodes[k]);
    for (int iter = 0; iter < 2; ++iter) {
      const auto tail = orthonormal_tail(family, points, nodes[k]);
      if (tail.dp_n == 0.0) break;
      const double step = tail.p_n / tail.dp_n;
      if (!std::isfinite(step) || std::abs(step) > 0.1 * gap) break;
      nodes[k] -= step;
    }
  }

  std::vector<double> weights(points);
  for (unsigned k = 0; k < points; ++k) {
    weights[k] = 1.0 / orthonormal_tail(family, points, nodes[k]).sum_sq_below;
  }

  if (family.symmetric()) {
    const double centre = family.mean();
    for (unsigned k = 0; k < points / 2; ++k) {
      const unsigned j = points - 1 - k;
      const double half = 0.5 * ((nodes[j] - centre) - (nodes[k] - centre));
      nodes[k] = centre - half;
      nodes[j] = centre + half;
      const double w = 0.5 * (weights[k] + weights[j]);
      weights[k] = weights[j] = w;
    }
    if (points % 2 == 1) nodes[points / 2] = centre;
  }

  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (auto& w : weights) w /= total;

  for (unsigned k = 0; k + 1 < points; ++k) {
    if (!(nodes[k] < nodes[k + 1])) {
      throw Error(ErrorCode::Numerical,
                  fmt::format("Gauss nodes for {} with {} points are not strictly increasing",
                              family.name(), points));
    }
  }
  return {std::move(nodes), std::move(weights)};
}

}  // namespace pceperf::orthopoly
