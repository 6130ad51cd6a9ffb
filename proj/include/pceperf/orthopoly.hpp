#ifndef PCEPERF_ORTHOPOLY_HPP
#define PCEPERF_ORTHOPOLY_HPP

// One-dimensional orthogonal polynomial families of the Askey scheme.
//
// Every inner product is taken against the weight normalized to a
// probability density, so <1, 1> = 1 for all families and a Gauss rule
// computes expectations directly:
//
//   Hermite              He_n, density exp(-x^2/2)/sqrt(2 pi) on R (probabilists')
//   Legendre             P_n, density 1/2 on [-1, 1]
//   Jacobi(a, b)         P_n^(a,b), density prop. to (1-x)^a (1+x)^b on [-1, 1]
//   Laguerre             L_n, density exp(-x) on [0, inf)
//   GeneralizedLaguerre  L_n^(a), density x^a exp(-x) / Gamma(a+1) on [0, inf)

#include <string>
#include <vector>

namespace pceperf::orthopoly {

inline constexpr unsigned kMaxDegree = 60;
inline constexpr unsigned kMaxPoints = 60;

enum class FamilyKind { Hermite, Legendre, Jacobi, Laguerre, GeneralizedLaguerre };

class PolynomialFamily {
 public:
  static PolynomialFamily hermite() { return {FamilyKind::Hermite, 0.0, 0.0}; }
  static PolynomialFamily legendre() { return {FamilyKind::Legendre, 0.0, 0.0}; }
  static PolynomialFamily laguerre() { return {FamilyKind::Laguerre, 0.0, 0.0}; }
  /// Weight (1-x)^alpha (1+x)^beta; both shapes must exceed -1.
  static PolynomialFamily jacobi(double alpha, double beta);
  /// Weight x^alpha exp(-x); alpha must exceed -1.
  static PolynomialFamily generalized_laguerre(double alpha);

  FamilyKind kind() const noexcept { return kind_; }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }

  /// True when the density is symmetric about the germ mean.
  bool symmetric() const noexcept;
  double support_lower() const noexcept;
  double support_upper() const noexcept;
  bool in_support(double x) const noexcept;
  /// Probability-normalized weight, i.e. the germ density.
  double density(double x) const;
  /// Germ mean E[xi].
  double mean() const noexcept;

  std::string name() const;

  friend bool operator==(const PolynomialFamily&, const PolynomialFamily&) = default;

 private:
  PolynomialFamily(FamilyKind kind, double alpha, double beta)
      : kind_(kind), alpha_(alpha), beta_(beta) {}

  FamilyKind kind_;
  double alpha_;
  double beta_;
};

/// Recurrence coefficients of the monic family:
///   pi_{n+1}(x) = (x - a_n) pi_n(x) - b_n pi_{n-1}(x),  b_0 = <1, 1> = 1.
struct MonicRecurrence {
  double a;
  double b;
};
MonicRecurrence monic_recurrence(const PolynomialFamily& family, unsigned n);

/// Classical (non-normalized) member of degree `degree`.
double evaluate(const PolynomialFamily& family, unsigned degree, double point);

/// <psi_n, psi_n> under the probability-normalized weight.
double norm_squared(const PolynomialFamily& family, unsigned degree);

/// evaluate() / sqrt(norm_squared()).
double evaluate_orthonormal(const PolynomialFamily& family, unsigned degree, double point);

/// Orthonormal values of degrees 0..max_degree at `point`, written to `out`.
void evaluate_orthonormal_all(const PolynomialFamily& family, unsigned max_degree, double point,
                              std::vector<double>& out);

struct QuadratureRule1D {
  std::vector<double> nodes;    // strictly increasing
  std::vector<double> weights;  // sum to 1
};

/// n-point Gauss rule for the germ density (Golub-Welsch).
QuadratureRule1D gauss_rule(const PolynomialFamily& family, unsigned points);

}  // namespace pceperf::orthopoly

#endif  // PCEPERF_ORTHOPOLY_HPP
