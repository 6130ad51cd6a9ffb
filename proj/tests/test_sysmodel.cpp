#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include <fmt/format.h>

#include "pceperf/sysmodel.hpp"
#include "support.hpp"

using namespace pceperf;
using namespace pceperf::sysmodel;
namespace fs = std::filesystem;

namespace {

// Product-form closed network by brute-force state enumeration (no think time):
// P(n) proportional to prod_k D_k^{n_k} over all n with sum N.
double enumerated_throughput(const std::vector<double>& d, unsigned population) {
  double norm_n = 0.0, norm_prev = 0.0;
  std::function<void(std::size_t, unsigned, double, double&)> rec = [&](std::size_t k, unsigned left, double w,
                                                                        double& acc) {
    if (k + 1 == d.size()) {
      acc += w * std::pow(d[k], left);
      return;
    }
    for (unsigned n = 0; n <= left; ++n) rec(k + 1, left - n, w * std::pow(d[k], n), acc);
  };
  rec(0, population, 1.0, norm_n);
  rec(0, population - 1, 1.0, norm_prev);
  return norm_prev / norm_n;
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / fmt::format("pceperf_sysmodel_{}", ::getpid());
  fs::create_directories(dir);
  return dir;
}

fs::path write_script(const std::string& name, const std::string& body) {
  const auto path = scratch_dir() / name;
  std::ofstream(path) << "#!/bin/sh\n" << body;
  fs::permissions(path, fs::perms::owner_all);
  return path;
}

std::vector<double> in(std::initializer_list<double> v) { return v; }

}  // namespace

TEST_CASE("mm1_metrics examples") {
  const auto a = mm1_metrics(50.0, 0.01);
  CHECK(a.utilization == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a.response_time == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(a.throughput == 50.0);
  CHECK(mm1_metrics(1e-9, 0.25).response_time == doctest::Approx(0.25).epsilon(1e-8));
  const auto b = mm1_metrics(99.0, 0.01);
  CHECK(b.utilization == doctest::Approx(0.99).epsilon(1e-14));
  CHECK(b.response_time == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_ERROR(mm1_metrics(100.0, 0.01), ErrorCode::Instability);
  try {
    mm1_metrics(150.0, 0.01);
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("arrival") != std::string::npos);
    CHECK(msg.find("service") != std::string::npos);
  }
  CHECK_ERROR(mm1_metrics(0.0, 0.01), ErrorCode::Domain);
  CHECK_ERROR(mm1_metrics(1.0, -0.01), ErrorCode::Domain);
}

TEST_CASE("property: M/M/1 response time increases with load") {
  double prev = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double r = mm1_metrics(k, 0.01).response_time;
    CHECK(r > prev);
    prev = r;
  }
}

TEST_CASE("Mm1Model binds parameters") {
  const Mm1Model model(ParamRef{0, 1.0}, 0.01);
  CHECK(model.output_names() == std::vector<std::string>{"utilization", "response_time", "throughput"});
  const auto out = model.evaluate(in({50.0}));
  CHECK(out[1] == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(model.output_index("throughput") == 2);
  CHECK_ERROR(model.output_index("latency"), ErrorCode::Config);
  const Mm1Model scaled(ParamRef{1, 0.5}, ParamRef{0, 0.001});
  CHECK(scaled.evaluate(in({10.0, 100.0}))[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("mva_solve examples") {
  const auto one = mva_solve({{{"cpu", 0.1}}, 0.0, 1});
  CHECK(one.response_time == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(one.throughput == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(one.stations[0].utilization == doctest::Approx(1.0).epsilon(1e-15));

  // Two hand-unrolled steps of the recursion for D = [0.1, 0.2].
  const double x1 = 1.0 / 0.3;
  const double q1 = x1 * 0.1, q2 = x1 * 0.2;
  const double r2 = 0.1 * (1.0 + q1) + 0.2 * (1.0 + q2);
  const auto two = mva_solve({{{"a", 0.1}, {"b", 0.2}}, 0.0, 2});
  CHECK(two.response_time == doctest::Approx(r2).epsilon(1e-14));
  CHECK(two.throughput == doctest::Approx(2.0 / r2).epsilon(1e-14));
  CHECK(two.response_time == doctest::Approx(0.46667).epsilon(1e-4));
  CHECK(two.throughput == doctest::Approx(enumerated_throughput({0.1, 0.2}, 2)).epsilon(1e-12));

  const auto big = mva_solve({{{"a", 0.05}, {"b", 0.2}, {"c", 0.1}}, 1.0, 200});
  CHECK(big.throughput <= 5.0 * (1.0 + 1e-12));
  CHECK(big.throughput > 0.99 * 5.0);

  CHECK_ERROR(validate({{}, 0.0, 1}), ErrorCode::Config);
  CHECK_ERROR(validate({{{"a", 0.0}}, 0.0, 1}), ErrorCode::Domain);
  CHECK_ERROR(validate({{{"a", 1.0}}, -1.0, 1}), ErrorCode::Domain);
  CHECK_ERROR(validate({{{"a", 1.0}}, 0.0, 0}), ErrorCode::Domain);
}

TEST_CASE("property: MVA agrees with state enumeration") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> d(2 + trial % 3);
    ClosedNetworkSpec spec;
    for (std::size_t k = 0; k < d.size(); ++k) {
      d[k] = u(rng);
      spec.stations.push_back({fmt::format("s{}", k), d[k]});
    }
    spec.population = 1 + static_cast<unsigned>(trial % 7);
    CHECK(mva_solve(spec).throughput == doctest::Approx(enumerated_throughput(d, spec.population)).epsilon(1e-11));
  }
}

TEST_CASE("property: MVA sanity bounds") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.001, 0.5);
  for (int trial = 0; trial < 30; ++trial) {
    ClosedNetworkSpec spec;
    double dmax = 0.0, dsum = 0.0;
    for (int k = 0; k < 1 + trial % 5; ++k) {
      const double d = u(rng);
      spec.stations.push_back({fmt::format("s{}", k), d});
      dmax = std::max(dmax, d);
      dsum += d;
    }
    spec.think_time = trial % 2 ? 0.0 : 2.0 * u(rng);
    double prev = 0.0;
    for (unsigned n = 1; n <= 60; n += 7) {
      spec.population = n;
      const auto r = mva_solve(spec);
      for (const auto& s : r.stations) {
        CHECK(s.utilization >= 0.0);
        CHECK(s.utilization <= 1.0 + 1e-12);
      }
      CHECK(r.throughput >= prev * (1.0 - 1e-12));
      CHECK(r.throughput <= std::min(1.0 / dmax, n / (spec.think_time + dsum)) + 1e-9);
      prev = r.throughput;
    }
  }
}

TEST_CASE("MvaModel outputs and population rounding") {
  const MvaModel model({{"cpu", ParamRef{0, 0.001}}, {"disk", 0.02}}, 1.0, ParamRef{1, 1.0});
  const std::vector<std::string> expected{"throughput", "response_time", "utilization.cpu", "utilization.disk",
                                          "queue_length.cpu", "queue_length.disk", "residence_time.cpu",
                                          "residence_time.disk"};
  CHECK(model.output_names() == expected);
  REQUIRE_FALSE(model.notes().empty());
  CHECK(model.notes()[0].find("round") != std::string::npos);

  const auto at = [&](double users) { return model.evaluate(in({5.0, users})); };
  CHECK(at(10.5) == at(10.0));
  CHECK(at(11.5) == at(12.0));
  CHECK(at(10.6) == at(11.0));
  const auto direct = mva_solve({{{"cpu", 0.005}, {"disk", 0.02}}, 1.0, 12});
  const auto out = at(12.0);
  CHECK(out[0] == direct.throughput);
  CHECK(out[1] == direct.response_time);
  CHECK(out[3] == direct.stations[1].utilization);
  CHECK(out[6] == direct.stations[0].residence_time);
  CHECK_ERROR(at(0.2), ErrorCode::Domain);

  const MvaModel fixed({{"cpu", 0.01}}, 0.0, 4.0);
  CHECK(fixed.notes().empty());
  CHECK_ERROR(MvaModel({{"a", 0.1}, {"a", 0.2}}, 0.0, 1.0), ErrorCode::Config);
}

TEST_CASE("parse_csv") {
  const auto t = parse_csv("# measured\nx, y ,z\n1,2,3\n\n  # note\n4.5,-1e-3,6\n");
  CHECK(t.header == std::vector<std::string>{"x", "y", "z"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][1] == -1e-3);

  try {
    parse_csv("a,b\n1,2\n3,oops\n", "data.csv");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("data.csv:3") != std::string::npos);
  }
  CHECK_ERROR(parse_csv("a,b\n1,2,3\n"), ErrorCode::Parse);
  CHECK_ERROR(parse_csv("a,a\n1,2\n"), ErrorCode::Parse);
  CHECK_ERROR(parse_csv("# nothing\n"), ErrorCode::Parse);
  CHECK_ERROR(read_csv("/nonexistent/pceperf.csv"), ErrorCode::Io);
}

TEST_CASE("dataset lookup") {
  const auto table = parse_csv("p,q,rt,tp\n1,10,0.5,100\n2,10,0.7,90\n3,20,0.9,80\n1,20,1.1,70\n");
  const DatasetSpec exact{"mem.csv", {"p", "q"}, {"tp", "rt"}, MatchMode::Exact};
  const DatasetModel ds(exact, table);
  CHECK(ds.row_count() == 4);
  CHECK(ds.evaluate(in({2.0, 10.0})) == in({90.0, 0.7}));
  CHECK(dataset_eval(ds, in({1.0 + 1e-12, 20.0})) == in({70.0, 1.1}));
  try {
    ds.evaluate(in({2.5, 15.0}));
    FAIL("expected an evaluation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Evaluation);
    CHECK(std::string(e.what()).find("nearest") != std::string::npos);
  }

  const DatasetModel near({"mem.csv", {"p", "q"}, {"rt"}, MatchMode::Nearest}, table);
  CHECK(near.match_row(in({1.5, 10.0})) == 0);
  CHECK(near.match_row(in({2.9, 19.0})) == 2);
  CHECK(near.evaluate(in({1.0, 16.0})) == in({1.1}));

  CHECK_ERROR(DatasetModel({"mem.csv", {"p", "missing"}, {"rt"}, MatchMode::Exact}, table), ErrorCode::Config);
  CHECK_ERROR(ds.evaluate(in({1.0})), ErrorCode::Domain);
}

TEST_CASE("dataset: 13 x 6 x 18 factorial grid") {
  const auto path = scratch_dir() / "wordcount.csv";
  {
    std::ofstream out(path);
    out << "# synthetic factorial design\nmappers,reducers,input_gb,runtime,memory\n";
    for (int a = 0; a < 13; ++a)
      for (int b = 0; b < 6; ++b)
        for (int c = 0; c < 18; ++c)
          out << fmt::format("{},{},{},{:.17g},{:.17g}\n", 2 + a, 1 + b, 0.5 * (c + 1), 3.0 * (c + 1) / (2 + a) + b,
                             1e9 * (1 + a + 0.1 * b));
  }
  const DatasetModel ds({path.string(), {"mappers", "reducers", "input_gb"}, {"runtime", "memory"}, MatchMode::Exact});
  CHECK(ds.row_count() == 1404);
  for (std::size_t r = 0; r < ds.row_count(); ++r) {
    const auto& x = ds.row_inputs(r);
    CHECK(ds.evaluate(x) == ds.row_outputs(r));
  }
}

TEST_CASE("format_csv_line round-trips") {
  const std::vector<double> v{0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 42.0};
  const auto line = format_csv_line(v);
  const auto back = parse_csv("a,b,c,d,e\n" + line + "\n");
  CHECK(back.rows[0] == v);
}

TEST_CASE("external_eval") {
  const auto echo = write_script("echo.sh", "read line\necho \"$line\"\n");
  CHECK(external_eval({echo.string()}, in({1.5, -2.0, 1.0 / 3.0}), 3) == in({1.5, -2.0, 1.0 / 3.0}));

  const auto mm1 = write_script("mm1.sh",
                                "awk -F, '{ u = $1 * $2; printf \"%.17g,%.17g,%.17g\\n\", u, $2 / (1 - u), $1 }'\n");
  for (double lam : {10.0, 37.5, 89.9}) {
    const auto out = external_eval({mm1.string()}, in({lam, 0.01}), 3);
    const auto ref = mm1_metrics(lam, 0.01);
    CHECK(std::abs(out[0] - ref.utilization) < 1e-9);
    CHECK(std::abs(out[1] - ref.response_time) < 1e-9);
    CHECK(std::abs(out[2] - ref.throughput) < 1e-9);
  }

  const auto fail = write_script("fail.sh", "read line\necho partial\necho 'bad thing' >&2\nexit 1\n");
  try {
    external_eval({fail.string()}, in({1.0}), 1);
    FAIL("expected an evaluation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Evaluation);
    const std::string msg = e.what();
    CHECK(msg.find("partial") != std::string::npos);
    CHECK(msg.find("bad thing") != std::string::npos);
  }
  const auto slow = write_script("slow.sh", "sleep 5\necho 1\n");
  CHECK_ERROR(external_eval({slow.string()}, in({1.0}), 1, std::chrono::milliseconds(200)), ErrorCode::Evaluation);
  const auto junk = write_script("junk.sh", "read line\necho 1,abc\n");
  CHECK_ERROR(external_eval({junk.string()}, in({1.0}), 2), ErrorCode::Evaluation);
  CHECK_ERROR(external_eval({echo.string()}, in({1.0, 2.0}), 3), ErrorCode::Evaluation);
  const auto lines = write_script("lines.sh", "read line\necho 1\necho 2\n");
  CHECK_ERROR(external_eval({lines.string()}, in({1.0}), 1), ErrorCode::Evaluation);
  CHECK_ERROR(external_eval({(scratch_dir() / "missing.sh").string()}, in({1.0}), 1), ErrorCode::Evaluation);
}

TEST_CASE("evaluate_all keeps row order and reports the first failure") {
  const auto mm1 = write_script("mm1_all.sh",
                                "awk -F, '{ u = $1 * $2; printf \"%.17g,%.17g,%.17g\\n\", u, $2 / (1 - u), $1 }'\n");
  const ExternalModel model({mm1.string()}, {"utilization", "response_time", "throughput"});
  Eigen::MatrixXd x(12, 2);
  for (int k = 0; k < 12; ++k) x.row(k) << 5.0 + 7.0 * k, 0.01;
  const auto serial = evaluate_all(model, x, 1);
  const auto parallel = evaluate_all(model, x, 4);
  CHECK(serial == parallel);
  for (int k = 0; k < 12; ++k) CHECK(serial(k, 2) == x(k, 0));

  const Mm1Model analytic(ParamRef{0, 1.0}, ParamRef{1, 1.0});
  x(9, 0) = 150.0;
  x(4, 0) = 120.0;
  try {
    evaluate_all(analytic, x, 3);
    FAIL("expected an evaluation error");
  } catch (const EvaluationError& e) {
    CHECK(e.index() == 4);
  }
  fs::remove_all(scratch_dir());
}
