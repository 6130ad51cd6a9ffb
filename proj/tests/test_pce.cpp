#include <cmath>
#include <random>

#include "pceperf/pce.hpp"
#include "support.hpp"

using namespace pceperf;
using namespace pceperf::pce;
using inputspace::Normal;
using inputspace::Uniform;

namespace {

// Brute-force count of exponent vectors with sum <= d.
std::size_t count_by_enumeration(std::size_t m, unsigned d) {
  std::size_t count = 0;
  std::vector<unsigned> e(m, 0);
  while (true) {
    unsigned s = 0;
    for (auto v : e) s += v;
    if (s <= d) ++count;
    std::size_t k = 0;
    while (k < m && e[k] == d) e[k++] = 0;
    if (k == m) break;
    ++e[k];
  }
  return count;
}

// Fixed polynomial targets written in raw germ monomials.
double poly_target(const Eigen::Ref<const Eigen::RowVectorXd>& x, unsigned d) {
  double y = 0.7;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (unsigned k = 1; k <= d; ++k) y += std::pow(-0.6, k) * (1.0 + static_cast<double>(i)) * std::pow(x(i), k) / k;
  }
  if (x.size() > 1 && d >= 2) y += 0.9 * std::pow(x(0), d - 1) * x(1);
  return y;
}

Eigen::VectorXd eval_rows(const Eigen::MatrixXd& x, unsigned d) {
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index k = 0; k < x.rows(); ++k) y(k) = poly_target(x.row(k), d);
  return y;
}

Eigen::RowVectorXd point(std::initializer_list<double> v) {
  Eigen::RowVectorXd p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p(i++) = x;
  return p;
}

}  // namespace

TEST_CASE("total_degree_basis: counts and order") {
  const auto s2 = testing::standard_normals(2);
  CHECK(total_degree_basis(s2, 3).size() == 10);
  for (std::size_t m = 1; m <= 4; ++m) {
    const auto basis = total_degree_basis(testing::standard_normals(m), 0);
    REQUIRE(basis.size() == 1);
    CHECK(basis.indices()[0] == MultiIndex(m, 0));
  }
  CHECK(total_degree_basis(testing::standard_uniforms(1), 16).size() == 17);

  for (std::size_t m = 1; m <= 4; ++m) {
    for (unsigned d = 0; d <= 6; ++d) {
      const auto basis = total_degree_basis(testing::standard_uniforms(m), d);
      CHECK(basis.size() == count_by_enumeration(m, d));
      CHECK(basis_size(m, d) == basis.size());
      for (std::size_t j = 1; j < basis.size(); ++j) {
        const auto& a = basis.indices()[j - 1];
        const auto& b = basis.indices()[j];
        CHECK((total_degree(a) < total_degree(b) || (total_degree(a) == total_degree(b) && a > b)));
      }
    }
  }
  const auto basis = total_degree_basis(s2, 2);
  const std::vector<MultiIndex> expected{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  CHECK(basis.indices() == expected);

  CHECK_ERROR(total_degree_basis(testing::standard_uniforms(10), 30), ErrorCode::SizeLimit);
}

TEST_CASE("eval_basis examples") {
  const auto leg = total_degree_basis(testing::standard_uniforms(2), 2);
  CHECK(leg.eval(0, point({0.3, -0.8})) == 1.0);
  CHECK(leg.eval(1, point({1.0, 0.4})) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
  const auto her = total_degree_basis(testing::standard_normals(2), 2);
  CHECK(her.eval(4, point({0.0, 1.7})) == 0.0);
  CHECK_ERROR(leg.eval(1, point({1.5, 0.0})), ErrorCode::Domain);
  const auto all = leg.eval_all(point({0.25, -0.5}));
  for (std::size_t j = 0; j < leg.size(); ++j)
    CHECK(all(static_cast<Eigen::Index>(j)) == doctest::Approx(leg.eval(j, point({0.25, -0.5}))).epsilon(1e-14));
}

TEST_CASE("fit_regression examples") {
  const auto spec = testing::standard_normals(2);
  const auto basis = total_degree_basis(spec, 3);
  const auto x = inputspace::sample_germ(*spec, 60, 1);
  const auto constant = fit_regression(basis, x, Eigen::VectorXd::Constant(60, 4.5));
  CHECK(constant.coefficients[0] == doctest::Approx(4.5).epsilon(1e-12));
  for (std::size_t j = 1; j < basis.size(); ++j) CHECK(std::abs(constant.coefficients[j]) < 1e-12);

  const auto uspec = testing::spec_of({Uniform{0.0, 1.0}});
  const auto ux = inputspace::sample_germ(*uspec, 50, 2);
  Eigen::VectorXd uy(50);
  for (int k = 0; k < 50; ++k) uy(k) = inputspace::to_physical(uspec->params()[0], ux(k, 0));
  for (unsigned d = 1; d <= 3; ++d) {
    const auto model = fit_regression(total_degree_basis(uspec, d), ux, uy);
    CHECK((predict_all(model, ux) - uy).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(model.sample_count == 50u);
    CHECK(model.fit_method == FitMethod::Regression);
  }

  const auto hspec = testing::standard_normals(1);
  const auto hx = inputspace::sample_germ(*hspec, 100, 3);
  Eigen::VectorXd hy = hx.col(0).array().square() - 1.0;
  const auto he2 = fit_regression(total_degree_basis(hspec, 2), hx, hy);
  CHECK(he2.coefficients[2] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(he2.coefficients[0]) < 1e-9);
  CHECK(std::abs(he2.coefficients[1]) < 1e-9);
}

TEST_CASE("fit_regression errors and oversampling note") {
  const auto spec = testing::standard_normals(2);
  const auto basis = total_degree_basis(spec, 2);
  const auto x = inputspace::sample_germ(*spec, 5, 1);
  CHECK_ERROR(fit_regression(basis, x, Eigen::VectorXd::Zero(5)), ErrorCode::Underdetermined);

  Eigen::MatrixXd dup(12, 2);
  for (int k = 0; k < 12; ++k) dup.row(k) = point({0.1 * (k % 3), 0.5});
  CHECK_ERROR(fit_regression(basis, dup, Eigen::VectorXd::Ones(12)), ErrorCode::RankDeficient);
  try {
    fit_regression(basis, dup, Eigen::VectorXd::Ones(12));
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("3 of 6 columns") != std::string::npos);
  }

  const auto x8 = inputspace::sample_germ(*spec, 8, 2);
  const auto thin = fit_regression(basis, x8, eval_rows(x8, 2));
  CHECK(thin.notes.size() == 1);
  const auto x12 = inputspace::sample_germ(*spec, 12, 2);
  CHECK(fit_regression(basis, x12, eval_rows(x12, 2)).notes.empty());
  CHECK_ERROR(fit_regression(basis, x12, Eigen::VectorXd::Zero(11)), ErrorCode::Domain);
}

TEST_CASE("fit_projection examples") {
  const auto hspec = testing::standard_normals(1);
  const auto rule = quadrature::smolyak_grid({orthopoly::PolynomialFamily::hermite()}, 2);
  const auto constant = fit_projection(total_degree_basis(hspec, 1), rule, [](const auto&) { return -2.5; });
  CHECK(constant.coefficients[0] == doctest::Approx(-2.5).epsilon(1e-12));
  CHECK(std::abs(constant.coefficients[1]) < 1e-12);
  CHECK(constant.fit_method == FitMethod::Projection);

  const auto lin = fit_projection(total_degree_basis(hspec, 1), rule, [](const auto& x) { return 3.0 + 2.0 * x(0); });
  CHECK(lin.coefficients[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(lin.coefficients[1] == doctest::Approx(2.0).epsilon(1e-12));

  const auto lspec = testing::standard_uniforms(1);
  const auto lrule = quadrature::smolyak_grid({orthopoly::PolynomialFamily::legendre()}, 2);
  const auto sq = fit_projection(total_degree_basis(lspec, 2), lrule, [](const auto& x) { return x(0) * x(0); });
  CHECK(sq.coefficients[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-13));

  try {
    fit_projection(total_degree_basis(hspec, 1), rule, [](const auto& x) -> double {
      if (x(0) > 0.5) throw std::runtime_error("bad node");
      return 0.0;
    });
    FAIL("expected an evaluation error");
  } catch (const EvaluationError& e) {
    CHECK(e.index() == 2);
  }
  CHECK_ERROR(fit_projection(total_degree_basis(lspec, 1), rule, std::vector<double>(rule.size(), 0.0)),
              ErrorCode::Domain);
}

TEST_CASE("predict and moments examples") {
  const auto hspec = testing::standard_normals(1);
  PceModel model{total_degree_basis(hspec, 1), {3.0, 2.0}, FitMethod::Projection, std::nullopt, std::nullopt, {}};
  CHECK(predict(model, point({0.0})) == 3.0);
  CHECK(predict(model, point({1.5})) == doctest::Approx(6.0).epsilon(1e-15));
  const auto m = moments(model);
  CHECK(m.mean == 3.0);
  CHECK(m.second_moment == doctest::Approx(13.0).epsilon(1e-15));
  CHECK(m.variance == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(m.sd == doctest::Approx(2.0).epsilon(1e-15));

  PceModel pure{total_degree_basis(hspec, 1), {0.0, 1.0}, FitMethod::Projection, std::nullopt, std::nullopt, {}};
  CHECK(moments(pure).mean == 0.0);
  CHECK(moments(pure).variance == 1.0);

  PceModel constant{total_degree_basis(testing::standard_uniforms(3), 0), {7.0}, FitMethod::Regression, std::nullopt,
                    std::nullopt, {}};
  CHECK(predict(constant, point({0.9, -0.2, 0.0})) == 7.0);
  CHECK(moments(constant).variance == 0.0);
}

TEST_CASE("select_degree examples") {
  const auto spec = testing::standard_uniforms(1);
  const auto x = inputspace::sample_germ(*spec, 200, 11);
  Eigen::VectorXd quad = 1.0 + 0.5 * x.col(0).array() - 2.0 * x.col(0).array().square();
  const auto q = select_degree(spec, x, quad, 10);
  CHECK(q.best_degree == 2);
  CHECK(q.loo_by_degree[1].loo_error < 1e-10);
  CHECK(q.loo_by_degree.size() == 10);
  CHECK(q.loo_by_degree.front().degree == 1);

  Eigen::VectorXd c = Eigen::VectorXd::Constant(200, 3.0);
  const auto flat = select_degree(spec, x, c, 5);
  CHECK(flat.best_degree == 1);
  CHECK(flat.loo_by_degree[0].loo_error == 0.0);

  const auto x1000 = inputspace::sample_germ(*spec, 1000, 12);
  const auto six = select_degree(spec, x1000, eval_rows(x1000, 6), 30);
  CHECK(six.best_degree == 6);

  const auto s3 = testing::standard_uniforms(3);
  const auto small = inputspace::sample_germ(*s3, 12, 3);
  const auto sel = select_degree(s3, small, eval_rows(small, 1), 4);
  CHECK(sel.best_degree == 1);
  CHECK(sel.notes.size() == 2);
  const auto tiny = inputspace::sample_germ(*s3, 4, 3);
  CHECK_ERROR(select_degree(s3, tiny, eval_rows(tiny, 1), 4), ErrorCode::InsufficientSamples);
}

TEST_CASE("serialization round-trip is bit exact") {
  const auto spec = testing::spec_of({Normal{5.0, 1.0}, Uniform{49.0, 98.0}, inputspace::Gamma{2.5, 0.3}});
  const auto x = inputspace::sample_germ(*spec, 80, 5);
  Eigen::VectorXd y(80);
  for (int k = 0; k < 80; ++k) y(k) = std::exp(0.1 * x(k, 0)) + std::sin(x(k, 1)) / 3.0 + 1e-7 * x(k, 2);
  auto model = fit_regression(total_degree_basis(spec, 3), x, y);
  model.loo_error = 0.1 + 1e-17;
  const auto back = deserialize(serialize(model));
  REQUIRE(back.coefficients.size() == model.coefficients.size());
  for (std::size_t j = 0; j < model.coefficients.size(); ++j) CHECK(back.coefficients[j] == model.coefficients[j]);
  CHECK(back.basis.indices() == model.basis.indices());
  CHECK(back.loo_error == model.loo_error);
  CHECK(back.sample_count == model.sample_count);
  CHECK(serialize(back) == serialize(model));
  CHECK(inputspace::to_json(back.basis.spec()) == inputspace::to_json(model.basis.spec()));

  auto doc = to_json(model);
  doc["version"] = 99;
  CHECK_ERROR(model_from_json(doc), ErrorCode::Version);
  CHECK_ERROR(deserialize("{ not json"), ErrorCode::Parse);
  auto trimmed = to_json(model);
  trimmed["coefficients"].erase(0);
  CHECK_ERROR(model_from_json(trimmed), ErrorCode::Parse);
  CHECK_ERROR(deserialize("{\"format\": \"other\"}"), ErrorCode::Parse);
}

TEST_CASE("property: exact reproduction by both methods") {
  for (std::size_t m = 1; m <= 2; ++m) {
    for (unsigned d = 1; d <= 5; ++d) {
      for (auto spec : {testing::standard_normals(m), testing::standard_uniforms(m)}) {
        const auto basis = total_degree_basis(spec, d);
        const std::size_t n = 2 * basis.size() + 5;
        const auto x = inputspace::sample_germ(*spec, n, 100 + d);
        const auto reg = fit_regression(basis, x, eval_rows(x, d));
        const auto fresh = inputspace::sample_germ(*spec, 100, 900 + d);
        CHECK((predict_all(reg, fresh) - eval_rows(fresh, d)).cwiseAbs().maxCoeff() < 1e-8);

        const auto rule = quadrature::smolyak_grid(basis.families(), d);
        const auto proj = fit_projection(basis, rule, [d](const auto& p) { return poly_target(p, d); });
        CHECK((predict_all(proj, fresh) - eval_rows(fresh, d)).cwiseAbs().maxCoeff() < 1e-8);
      }
    }
  }
}

TEST_CASE("property: regression and projection agree on smooth functions") {
  auto smooth = [](const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    double s = 0.2;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += 0.1 / (1.0 + static_cast<double>(i)) * x(i);
    return std::exp(s);
  };
  for (std::size_t m = 1; m <= 2; ++m) {
    for (unsigned d = 1; d <= 4; ++d) {
      const auto spec = testing::standard_uniforms(m);
      const auto basis = total_degree_basis(spec, d);
      const std::size_t n = 5 * basis.size();
      // Stratified (quasi-random) design in the germ space.
      Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < m; ++i) {
          const double golden = i == 0 ? 0.6180339887498949 : 0.7548776662466927;
          const double u = std::fmod(0.5 + golden * static_cast<double>(k + 1), 1.0);
          x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = 2.0 * u - 1.0;
        }
      }
      Eigen::VectorXd y(x.rows());
      for (Eigen::Index k = 0; k < x.rows(); ++k) y(k) = smooth(x.row(k));
      const auto reg = fit_regression(basis, x, y);
      const auto rule = quadrature::smolyak_grid(basis.families(), d + 4);
      const auto proj = fit_projection(basis, rule, smooth);
      // Leading coefficients dominate; compare relative to the coefficient scale.
      double scale = 0.0;
      for (double b : proj.coefficients) scale = std::max(scale, std::abs(b));
      for (std::size_t j = 0; j < basis.size(); ++j) {
        CHECK_MESSAGE(std::abs(reg.coefficients[j] - proj.coefficients[j]) < 1e-3 * scale,
                      "m=" << m << " d=" << d << " j=" << j);
      }
    }
  }
}

TEST_CASE("property: moments match sampled predictions") {
  const auto spec = testing::spec_of({Normal{0.0, 1.0}, Uniform{2.0, 4.0}});
  const auto basis = total_degree_basis(spec, 3);
  std::mt19937_64 rng(42);
  std::normal_distribution<double> nd;
  PceModel model{basis, {}, FitMethod::Regression, std::nullopt, std::nullopt, {}};
  for (std::size_t j = 0; j < basis.size(); ++j) model.coefficients.push_back(nd(rng) / (1.0 + j));
  const auto m = moments(model);
  CHECK(std::abs(m.variance - (m.second_moment - m.mean * m.mean)) < 1e-9 * std::max(1.0, m.second_moment));

  const std::size_t n = 1'000'000;
  const auto x = inputspace::sample_germ(*spec, n, 77);
  const Eigen::VectorXd y = predict_all(model, x);
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(n - 1);
  const double fourth = (y.array() - mean).pow(4).mean();
  CHECK(std::abs(mean - m.mean) < 3.0 * std::sqrt(var / n));
  CHECK(std::abs(var - m.variance) < 3.0 * std::sqrt((fourth - var * var) / n));
}
