#include "pceperf/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "pceperf/error.hpp"

namespace pceperf::quadrature {

namespace {

constexpr double kMergeTolerance = 1e-12;

void check_families(const std::vector<orthopoly::PolynomialFamily>& families) {
  if (families.empty()) throw Error(ErrorCode::Domain, "quadrature needs dimension m >= 1");
}

[[noreturn]] void too_large(std::size_t count) {
  throw Error(ErrorCode::SizeLimit,
              fmt::format("quadrature rule would need {} nodes (limit {})", count, kMaxNodes));
}

// Visits every point of the tensor product of `rules`, first dimension
// slowest.
template <class Visit>
void for_each_tensor_point(const std::vector<const orthopoly::QuadratureRule1D*>& rules,
                           Visit&& visit) {
  const std::size_t m = rules.size();
  std::vector<std::size_t> pos(m, 0);
  std::vector<double> point(m);
  while (true) {
    double w = 1.0;
    for (std::size_t d = 0; d < m; ++d) {
      point[d] = rules[d]->nodes[pos[d]];
      w *= rules[d]->weights[pos[d]];
    }
    visit(point, w);
    std::size_t d = m;
    while (d > 0) {
      --d;
      if (++pos[d] < rules[d]->nodes.size()) break;
      pos[d] = 0;
      if (d == 0) return;
    }
  }
}

// Accumulates weighted points, merging coincident nodes.
class NodeAccumulator {
 public:
  explicit NodeAccumulator(std::size_t m) : m_(m) {}

  void add(const std::vector<double>& point, double weight) {
    auto lo = by_first_.lower_bound(point[0] - kMergeTolerance);
    auto hi = by_first_.upper_bound(point[0] + kMergeTolerance);
    for (auto it = lo; it != hi; ++it) {
      const auto& other = points_[it->second];
      bool same = true;
      for (std::size_t d = 1; d < m_ && same; ++d)
        same = std::abs(other[d] - point[d]) <= kMergeTolerance;
      if (same) {
        weights_[it->second] += weight;
        return;
      }
    }
    by_first_.emplace(point[0], points_.size());
    points_.push_back(point);
    weights_.push_back(weight);
    if (points_.size() > kMaxNodes) too_large(points_.size());
  }

  QuadratureRuleND finish(std::vector<orthopoly::PolynomialFamily> families) && {
    std::vector<std::size_t> order(points_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return points_[a] < points_[b]; });
    QuadratureRuleND rule;
    rule.nodes.resize(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(m_));
    rule.weights.resize(order.size());
    for (std::size_t q = 0; q < order.size(); ++q) {
      for (std::size_t d = 0; d < m_; ++d) rule.nodes(q, d) = points_[order[q]][d];
      rule.weights[q] = weights_[order[q]];
    }
    rule.families = std::move(families);
    return rule;
  }

 private:
  std::size_t m_;
  std::vector<std::vector<double>> points_;
  std::vector<double> weights_;
  std::multimap<double, std::size_t> by_first_;
};

double binomial(unsigned n, unsigned k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

void check_weight_sum(const QuadratureRuleND& rule) {
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-10) {
    throw Error(ErrorCode::Numerical,
                fmt::format("quadrature weights sum to {:.17g}, expected 1", total));
  }
}

}  // namespace

QuadratureRuleND tensor_grid(const std::vector<orthopoly::PolynomialFamily>& families,
                             const std::vector<unsigned>& points_per_dim) {
  check_families(families);
  if (families.size() != points_per_dim.size()) {
    throw Error(ErrorCode::Domain, "families and points_per_dim must have the same length");
  }
  double count = 1.0;
  for (unsigned p : points_per_dim) {
    if (p == 0) throw Error(ErrorCode::Domain, "each dimension needs at least one point");
    count *= p;
  }
  if (count > static_cast<double>(kMaxNodes)) too_large(static_cast<std::size_t>(count));

  const std::size_t m = families.size();
  std::vector<orthopoly::QuadratureRule1D> rules;
  rules.reserve(m);
  for (std::size_t d = 0; d < m; ++d) rules.push_back(orthopoly::gauss_rule(families[d], points_per_dim[d]));
  std::vector<const orthopoly::QuadratureRule1D*> refs;
  for (const auto& r : rules) refs.push_back(&r);

  QuadratureRuleND rule;
  rule.nodes.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(m));
  rule.weights.reserve(static_cast<std::size_t>(count));
  Eigen::Index q = 0;
  for_each_tensor_point(refs, [&](const std::vector<double>& point, double w) {
    for (std::size_t d = 0; d < m; ++d) rule.nodes(q, d) = point[d];
    rule.weights.push_back(w);
    ++q;
  });
  rule.families = families;
  return rule;
}

unsigned smolyak_points(const orthopoly::PolynomialFamily& family, unsigned level, Growth growth) {
  if (growth == Growth::Symmetric && family.symmetric()) return level % 2 == 0 ? level + 1 : level + 2;
  return level + 1;
}

QuadratureRuleND smolyak_grid(const std::vector<orthopoly::PolynomialFamily>& families,
                              unsigned level, Growth growth) {
  check_families(families);
  const std::size_t m = families.size();
  const unsigned min_sum = level + 1 >= m ? level + 1 - static_cast<unsigned>(m) : 0;

  // Collect the combination terms first so the size limit can be checked
  // before any node is generated.
  struct Term {
    std::vector<unsigned> levels;
    double coefficient;
  };
  std::vector<Term> terms;
  std::vector<unsigned> levels(m, 0);
  double raw_count = 0.0;
  auto enumerate = [&](auto&& self, std::size_t dim, unsigned used) -> void {
    if (dim + 1 == m) {
      for (unsigned last = (used < min_sum ? min_sum - used : 0); used + last <= level; ++last) {
        levels[dim] = last;
        const unsigned total = used + last;
        const unsigned gap = level - total;
        const double coeff = (gap % 2 == 0 ? 1.0 : -1.0) * binomial(static_cast<unsigned>(m - 1), gap);
        if (coeff == 0.0) continue;
        double size = 1.0;
        for (std::size_t d = 0; d < m; ++d) size *= smolyak_points(families[d], levels[d], growth);
        raw_count += size;
        terms.push_back({levels, coeff});
      }
      return;
    }
    for (unsigned l = 0; used + l <= level; ++l) {
      levels[dim] = l;
      self(self, dim + 1, used + l);
    }
  };
  enumerate(enumerate, 0, 0);
  if (raw_count > static_cast<double>(kMaxNodes)) too_large(static_cast<std::size_t>(raw_count));

  std::map<std::pair<std::size_t, unsigned>, orthopoly::QuadratureRule1D> cache;
  auto rule_for = [&](std::size_t d, unsigned l) -> const orthopoly::QuadratureRule1D* {
    const unsigned points = smolyak_points(families[d], l, growth);
    auto key = std::make_pair(d, points);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, orthopoly::gauss_rule(families[d], points)).first;
    return &it->second;
  };

  NodeAccumulator acc(m);
  for (const auto& term : terms) {
    std::vector<const orthopoly::QuadratureRule1D*> refs(m);
    for (std::size_t d = 0; d < m; ++d) refs[d] = rule_for(d, term.levels[d]);
    for_each_tensor_point(refs, [&](const std::vector<double>& point, double w) {
      acc.add(point, term.coefficient * w);
    });
  }
  auto rule = std::move(acc).finish(families);
  check_weight_sum(rule);
  return rule;
}

double integrate(const QuadratureRuleND& rule, const PointFunction& fn) {
  double total = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    double value = 0.0;
    try {
      value = fn(rule.nodes.row(static_cast<Eigen::Index>(q)));
    } catch (const EvaluationError&) {
      throw;
    } catch (const std::exception& e) {
      throw EvaluationError(q, e.what());
    }
    total += rule.weights[q] * value;
  }
  return total;
}

double integrate(const QuadratureRuleND& rule, const std::vector<double>& values) {
  if (values.size() != rule.size()) {
    throw Error(ErrorCode::Domain, "value count does not match the quadrature node count");
  }
  double total = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) total += rule.weights[q] * values[q];
  return total;
}

}  // namespace pceperf::quadrature
