#ifndef PCEPERF_SPECIAL_HPP
#define PCEPERF_SPECIAL_HPP

namespace pceperf::special {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile for p in (0, 1); rational approximation refined
/// by one Halley step against erfc. Absolute error well below 1e-12.
/// Returns -inf / +inf at p == 0 / p == 1.
double normal_quantile(double p);

/// Student-t quantile with `df` degrees of freedom, p in (0, 1).
double student_t_quantile(double p, double df);

}  // namespace pceperf::special

#endif  // PCEPERF_SPECIAL_HPP
