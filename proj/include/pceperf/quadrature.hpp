#ifndef PCEPERF_QUADRATURE_HPP
#define PCEPERF_QUADRATURE_HPP

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "pceperf/orthopoly.hpp"

namespace pceperf::quadrature {

inline constexpr std::size_t kMaxNodes = 10'000'000;

/// Multidimensional rule over the germ space. Row q of `nodes` is one
/// m-dimensional point; sparse rules may carry negative weights.
struct QuadratureRuleND {
  Eigen::MatrixXd nodes;
  std::vector<double> weights;
  std::vector<orthopoly::PolynomialFamily> families;

  std::size_t size() const noexcept { return weights.size(); }
  std::size_t dimension() const noexcept { return families.size(); }
};

QuadratureRuleND tensor_grid(const std::vector<orthopoly::PolynomialFamily>& families,
                             const std::vector<unsigned>& points_per_dim);

/// Number of 1-D Gauss points used at Smolyak level `level`.
///
/// Linear:    n(l) = l + 1 in every dimension.
/// Symmetric: n(l) = smallest odd number >= l + 1 for families with a
///            symmetric density (every rule then contains the centre node
///            and merging collapses the copies), n(l) = l + 1 otherwise.
///
/// Both sequences are exact to degree >= 2l + 1, so a level-L rule is exact
/// for total degree <= 2L + 1.
enum class Growth { Linear, Symmetric };

unsigned smolyak_points(const orthopoly::PolynomialFamily& family, unsigned level, Growth growth);

/// Smolyak combination-technique rule; coincident nodes (every coordinate
/// within 1e-12) are merged by summing weights. Nodes are returned in
/// lexicographic order.
QuadratureRuleND smolyak_grid(const std::vector<orthopoly::PolynomialFamily>& families,
                              unsigned level, Growth growth = Growth::Symmetric);

using PointFunction = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&)>;

/// Sum of w_q f(x_q) in node order. Exceptions from fn are rethrown as
/// EvaluationError carrying the node index.
double integrate(const QuadratureRuleND& rule, const PointFunction& fn);

/// Weighted sum over precomputed node values.
double integrate(const QuadratureRuleND& rule, const std::vector<double>& values);

}  // namespace pceperf::quadrature

#endif  // PCEPERF_QUADRATURE_HPP
