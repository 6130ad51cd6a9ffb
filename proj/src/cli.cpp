#include "pceperf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "pceperf/quadrature.hpp"
#include "pceperf/robustness.hpp"

namespace pceperf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string g17(double v) { return fmt::format("{:.17g}", v); }

json provenance(const AnalysisConfig* config, const RunOptions& options, const std::string& command) {
  json p{{"tool", "pceperf"}, {"version", kToolVersion}, {"command", command}};
  if (config) {
    p["config_hash"] = config_hash(*config);
    p["seed"] = config->seed;
  }
  if (options.timestamp) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
    p["generated_at"] = buffer;
  }
  return p;
}

void write_file(const RunOptions& options, const std::string& name, const std::string& content) {
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  const auto path = fs::path(options.out_dir) / name;
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  file << content;
  if (!file) throw Error(ErrorCode::Io, fmt::format("failed writing '{}'", path.string()));
}

void write_json(const RunOptions& options, const std::string& name, const json& doc) {
  write_file(options, name, doc.dump(2) + "\n");
}

std::string safe_name(const std::string& index) {
  std::string out = index;
  for (auto& c : out)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return out;
}

/// Evaluates the model at every germ row; returns n x (all outputs).
Eigen::MatrixXd evaluate_germ(const AnalysisConfig& config, const sysmodel::PerformanceModel& model,
                              const Eigen::MatrixXd& germ, unsigned threads) {
  Eigen::MatrixXd physical(germ.rows(), germ.cols());
  for (Eigen::Index k = 0; k < germ.rows(); ++k) physical.row(k) = inputspace::to_physical(*config.problem, germ.row(k));
  return sysmodel::evaluate_all(model, physical, threads);
}

void announce_notes(const sysmodel::PerformanceModel& model) {
  for (const auto& note : model.notes()) std::cerr << "note: " << note << "\n";
}

struct Design {
  Eigen::MatrixXd germ;
  std::optional<quadrature::QuadratureRuleND> rule;
};

Design fit_design(const AnalysisConfig& config) {
  if (config.pce.fit == pce::FitMethod::Projection) {
    const unsigned level = config.pce.sparse_level.value_or(*config.pce.degree);
    auto rule = quadrature::smolyak_grid(config.problem->families(), level);
    Eigen::MatrixXd nodes = rule.nodes;
    return {std::move(nodes), std::move(rule)};
  }
  return {inputspace::sample_germ(*config.problem, config.pce.samples, stream_seed(config, SeedStream::Samples)),
          std::nullopt};
}

struct FitOutcome {
  pce::PceModel model;
  std::vector<pce::DegreeLoo> sweep;
  std::vector<std::string> notes;
};

FitOutcome fit_index(const AnalysisConfig& config, const Design& design, const Eigen::VectorXd& y) {
  if (design.rule) {
    const pce::BasisSet basis(config.problem, *config.pce.degree);
    std::vector<double> values(y.data(), y.data() + y.size());
    return {pce::fit_projection(basis, *design.rule, values), {}, {}};
  }
  if (!config.pce.degree) {
    const auto selection = pce::select_degree(config.problem, design.germ, y, config.pce.d_max);
    auto model = pce::fit_regression(pce::BasisSet(config.problem, selection.best_degree), design.germ, y);
    for (const auto& entry : selection.loo_by_degree)
      if (entry.degree == selection.best_degree) model.loo_error = entry.loo_error;
    return {std::move(model), selection.loo_by_degree, selection.notes};
  }
  const pce::BasisSet basis(config.problem, *config.pce.degree);
  auto model = pce::fit_regression(basis, design.germ, y);
  FitOutcome outcome{std::move(model), {}, {}};
  if (static_cast<std::size_t>(design.germ.rows()) > basis.size()) {
    const auto loo = robustness::loo_error(basis, design.germ, y);
    outcome.model.loo_error = loo.loo_error;
    outcome.sweep.push_back({loo.degree, loo.loo_error, loo.sample_count});
  } else {
    outcome.notes.push_back("leave-one-out error needs more samples than basis terms");
  }
  return outcome;
}

json robustness_json(const robustness::RobustnessReport& r) {
  return {{"index", r.index_name}, {"degree", r.degree},  {"mean", r.mean},
          {"sd", r.sd},            {"cov_percent", r.cov_percent}, {"fit_method", r.fit_method}};
}

void print_summary(const robustness::RobustnessReport& r) {
  std::cout << fmt::format("{}: degree {}  mean {:.4g}  sd {:.4g}  cov {:.4g}%\n", r.index_name, r.degree, r.mean,
                           r.sd, r.cov_percent);
}

std::string optional_g17(const std::optional<double>& v) { return v ? g17(*v) : std::string(); }

}  // namespace

std::string model_file_name(const std::string& index) { return "model_" + safe_name(index) + ".json"; }

int exit_status(const Error& error) noexcept {
  if (const auto* cli = dynamic_cast<const CliError*>(&error)) return cli->exit_status();
  switch (error.code()) {
    case ErrorCode::Config:
    case ErrorCode::Parse:
    case ErrorCode::Io:
      return 1;
    case ErrorCode::Evaluation:
      return 3;
    default:
      return 2;
  }
}

json cmd_fit(const AnalysisConfig& config, const RunOptions& options) {
  const auto model = build_model(config);
  announce_notes(*model);
  const auto design = fit_design(config);
  const auto outputs = evaluate_germ(config, *model, design.germ, options.threads);

  json report{{"provenance", provenance(&config, options, "fit")},
              {"cov_definition", robustness::kCovDefinition},
              {"indices", json::array()}};
  if (!model->notes().empty()) report["model_notes"] = model->notes();
  std::string summary = "index,degree,mean,sd,cov\n";
  std::string sweep_csv = "index,degree,loo_error,sample_count\n";

  for (const auto& index : config.indices) {
    const Eigen::VectorXd y = outputs.col(static_cast<Eigen::Index>(model->output_index(index)));
    auto outcome = fit_index(config, design, y);
    for (const auto& note : model->notes()) outcome.model.notes.push_back(note);
    const auto file = model_file_name(index);
    write_file(options, file, pce::serialize(outcome.model));

    const auto r = robustness::robustness_report(outcome.model, index);
    print_summary(r);
    json entry{{"robustness", robustness_json(r)},
               {"loo_error", outcome.model.loo_error ? json(*outcome.model.loo_error) : json(nullptr)},
               {"sample_count", design.germ.rows()},
               {"model_file", file},
               {"degree_sweep", json::array()}};
    for (const auto& d : outcome.sweep) {
      entry["degree_sweep"].push_back({{"degree", d.degree}, {"loo_error", d.loo_error}, {"sample_count", d.sample_count}});
      sweep_csv += fmt::format("{},{},{},{}\n", index, d.degree, g17(d.loo_error), d.sample_count);
    }
    auto notes = outcome.notes;
    for (const auto& n : outcome.model.notes) notes.push_back(n);
    entry["notes"] = notes;
    report["indices"].push_back(entry);
    summary += fmt::format("{},{},{},{},{}\n", index, r.degree, g17(r.mean), g17(r.sd), g17(r.cov_percent));
  }
  write_json(options, "fit_report.json", report);
  write_file(options, "fit_report.csv", summary);
  write_file(options, "degree_sweep.csv", sweep_csv);
  return report;
}

json cmd_analyze(const std::vector<std::string>& model_files, const RunOptions& options,
                 const std::optional<AnalysisConfig>& config) {
  std::vector<std::pair<std::string, std::string>> inputs;  // (index name, path)
  if (!model_files.empty()) {
    for (const auto& path : model_files) {
      auto stem = fs::path(path).stem().string();
      if (stem.rfind("model_", 0) == 0) stem = stem.substr(6);
      inputs.emplace_back(stem, path);
    }
  } else if (config) {
    for (const auto& index : config->indices)
      inputs.emplace_back(index, (fs::path(options.out_dir) / model_file_name(index)).string());
  } else {
    throw Error(ErrorCode::Config, "analyze needs --model FILE or --config");
  }

  json report{{"provenance", provenance(config ? &*config : nullptr, options, "analyze")},
              {"cov_definition", robustness::kCovDefinition},
              {"indices", json::array()}};
  std::string csv = "index,degree,mean,sd,cov\n";
  for (const auto& [index, path] : inputs) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw CliError(ErrorCode::Io, 2, fmt::format("cannot open model file '{}'", path));
    std::stringstream buffer;
    buffer << file.rdbuf();
    std::optional<pce::PceModel> model;
    try {
      model = pce::deserialize(buffer.str());
    } catch (const Error& e) {
      throw CliError(e.code(), 2, fmt::format("{}: {}", path, e.what()));
    }
    const auto r = robustness::robustness_report(*model, index);
    print_summary(r);
    json entry = robustness_json(r);
    entry["model_file"] = fs::path(path).filename().string();
    entry["loo_error"] = model->loo_error ? json(*model->loo_error) : json(nullptr);
    entry["sample_count"] = model->sample_count ? json(*model->sample_count) : json(nullptr);
    report["indices"].push_back(entry);
    csv += fmt::format("{},{},{},{},{}\n", index, r.degree, g17(r.mean), g17(r.sd), g17(r.cov_percent));
  }
  write_json(options, "analyze_report.json", report);
  write_file(options, "analyze_report.csv", csv);
  return report;
}

json cmd_mc(const AnalysisConfig& config, const RunOptions& options) {
  const auto model = build_model(config);
  announce_notes(*model);
  inputspace::GermSampler sampler(*config.problem, stream_seed(config, SeedStream::MonteCarlo));
  std::vector<std::vector<double>> cache;
  auto row_outputs = [&](std::size_t i) -> const std::vector<double>& {
    while (cache.size() <= i) {
      const Eigen::RowVectorXd x = inputspace::to_physical(*config.problem, sampler.next());
      try {
        cache.push_back(model->evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))));
      } catch (const EvaluationError&) {
        throw;
      } catch (const std::exception& e) {
        throw EvaluationError(cache.size(), e.what());
      }
    }
    return cache[i];
  };

  auto mc = config.mc;
  mc.seed = stream_seed(config, SeedStream::MonteCarlo);
  json report{{"provenance", provenance(&config, options, "mc")}, {"indices", json::array()}};
  for (const auto& index : config.indices) {
    const auto column = model->output_index(index);
    const auto result =
        montecarlo::run_mc_on_responses([&](std::size_t i) { return row_outputs(i)[column]; }, mc);
    const auto trace_file = "mc_trace_" + safe_name(index) + ".csv";
    std::string trace = "iteration,relative_error\n";
    for (const auto& t : result.error_trace) trace += fmt::format("{},{}\n", t.iteration, g17(t.relative_error));
    write_file(options, trace_file, trace);
    report["indices"].push_back({{"index", index},
                                 {"samples_used", result.samples_used},
                                 {"mean", result.mean},
                                 {"mean_square", result.mean_square},
                                 {"sd", result.sd},
                                 {"relative_error", result.relative_error},
                                 {"converged", result.converged},
                                 {"trace_file", trace_file}});
    std::cout << fmt::format("{}: samples {}  mean {:.4g}  sd {:.4g}  e {:.4g}  {}\n", index, result.samples_used,
                             result.mean, result.sd, result.relative_error,
                             result.converged ? "converged" : "not converged");
  }
  write_json(options, "mc_report.json", report);
  return report;
}

json cmd_accuracy_sweep(const AnalysisConfig& config, const RunOptions& options) {
  const auto model = build_model(config);
  announce_notes(*model);
  const auto n_max = *std::max_element(config.sample_counts.begin(), config.sample_counts.end());
  const Eigen::MatrixXd germ =
      inputspace::sample_germ(*config.problem, n_max, stream_seed(config, SeedStream::Samples));
  const auto outputs = evaluate_germ(config, *model, germ, options.threads);

  json report{{"provenance", provenance(&config, options, "sweep-samples")}, {"rows", json::array()}};
  if (config.pce.fit == pce::FitMethod::Projection) {
    report["notes"] = json::array({"sample sweeps always fit by regression"});
  }
  std::string csv = "index,samples,degree,loo_error\n";
  for (const auto& index : config.indices) {
    const Eigen::VectorXd y_all = outputs.col(static_cast<Eigen::Index>(model->output_index(index)));
    for (const auto count : config.sample_counts) {
      const auto n = static_cast<Eigen::Index>(count);
      json row{{"index", index}, {"samples", count}};
      try {
        const Eigen::MatrixXd x = germ.topRows(n);
        const Eigen::VectorXd y = y_all.head(n);
        unsigned degree = 0;
        double loo = 0.0;
        if (config.pce.degree) {
          const auto r = robustness::loo_error(pce::BasisSet(config.problem, *config.pce.degree), x, y);
          degree = r.degree;
          loo = r.loo_error;
        } else {
          const auto selection = pce::select_degree(config.problem, x, y, config.pce.d_max);
          degree = selection.best_degree;
          for (const auto& e : selection.loo_by_degree)
            if (e.degree == degree) loo = e.loo_error;
        }
        row["degree"] = degree;
        row["loo_error"] = loo;
        csv += fmt::format("{},{},{},{}\n", index, count, degree, g17(loo));
      } catch (const EvaluationError&) {
        throw;
      } catch (const Error& e) {
        row["degree"] = nullptr;
        row["loo_error"] = nullptr;
        row["error"] = e.what();
        csv += fmt::format("{},{},,\n", index, count);
      }
      report["rows"].push_back(row);
    }
  }
  write_json(options, "sweep_samples.json", report);
  write_file(options, "sweep_samples.csv", csv);
  return report;
}

json cmd_noise_sweep(const AnalysisConfig& config, const RunOptions& options) {
  const auto model = build_model(config);
  announce_notes(*model);
  const Eigen::MatrixXd germ =
      inputspace::sample_germ(*config.problem, config.pce.samples, stream_seed(config, SeedStream::Samples));
  const auto outputs = evaluate_germ(config, *model, germ, options.threads);
  const robustness::NoiseSpec noise{config.ran_levels, stream_seed(config, SeedStream::Noise)};

  json report{{"provenance", provenance(&config, options, "sweep-noise")}, {"indices", json::array()}};
  for (const auto& index : config.indices) {
    const Eigen::VectorXd y = outputs.col(static_cast<Eigen::Index>(model->output_index(index)));
    const auto rows = robustness::noise_sweep(config.problem, germ, y, noise, config.pce.d_max);
    const auto file = "noise_" + safe_name(index) + ".csv";
    std::string csv = "ran_level,best_degree,loo_error\n";
    json entry{{"index", index}, {"table_file", file}, {"rows", json::array()}};
    for (const auto& r : rows) {
      csv += fmt::format("{},{},{}\n", g17(r.ran_level), r.best_degree ? std::to_string(*r.best_degree) : "",
                         optional_g17(r.loo_error));
      json row{{"ran_level", r.ran_level},
               {"best_degree", r.best_degree ? json(*r.best_degree) : json(nullptr)},
               {"loo_error", r.loo_error ? json(*r.loo_error) : json(nullptr)}};
      if (!r.error.empty()) row["error"] = r.error;
      entry["rows"].push_back(row);
    }
    write_file(options, file, csv);
    report["indices"].push_back(entry);
  }
  write_json(options, "noise_report.json", report);
  return report;
}

json cmd_pdf(const AnalysisConfig& config, const RunOptions& options) {
  const auto model = build_model(config);
  announce_notes(*model);
  const Eigen::MatrixXd germ =
      inputspace::sample_germ(*config.problem, config.pce.samples, stream_seed(config, SeedStream::Samples));
  const auto outputs = evaluate_germ(config, *model, germ, options.threads);
  const auto design = fit_design(config);
  const auto design_outputs =
      design.rule ? evaluate_germ(config, *model, design.germ, options.threads) : outputs;

  json report{{"provenance", provenance(&config, options, "pdf")}, {"indices", json::array()}};
  for (const auto& index : config.indices) {
    const auto column = static_cast<Eigen::Index>(model->output_index(index));
    const Eigen::VectorXd measured = outputs.col(column);
    const auto outcome = fit_index(config, design, design_outputs.col(column));
    const Eigen::VectorXd predicted = pce::predict_all(outcome.model, germ);

    const double h = robustness::silverman_bandwidth(measured);
    const double lo = measured.minCoeff() - 3.0 * h;
    const double hi = measured.maxCoeff() + 3.0 * h;
    std::vector<double> grid(config.pdf_points);
    for (std::size_t k = 0; k < grid.size(); ++k)
      grid[k] = std::lerp(lo, hi, static_cast<double>(k) / static_cast<double>(grid.size() - 1));
    const auto d_measured = robustness::kde_pdf(measured, grid);
    const auto d_pce = robustness::kde_pdf(predicted, grid);

    const auto file = "pdf_" + safe_name(index) + ".csv";
    std::string csv = "grid,density_measured,density_pce\n";
    for (std::size_t k = 0; k < grid.size(); ++k)
      csv += fmt::format("{},{},{}\n", g17(grid[k]), g17(d_measured[k]), g17(d_pce[k]));
    write_file(options, file, csv);
    report["indices"].push_back({{"index", index},
                                 {"curve_file", file},
                                 {"degree", outcome.model.basis.degree()},
                                 {"bandwidth_measured", h},
                                 {"bandwidth_pce", robustness::silverman_bandwidth(predicted)},
                                 {"grid_lo", lo},
                                 {"grid_hi", hi},
                                 {"points", grid.size()},
                                 {"sample_count", germ.rows()}});
  }
  write_json(options, "pdf_report.json", report);
  return report;
}

int main(int argc, char** argv) {
  CLI::App app{"Polynomial chaos robustness analysis for performance models", "pceperf"};
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  RunOptions options;
  bool no_timestamp = false;
  app.add_option("command", command, "fit | analyze | mc | sweep-samples | sweep-noise | pdf")
      ->required()
      ->check(CLI::IsMember({"fit", "analyze", "mc", "sweep-samples", "sweep-noise", "pdf"}));
  app.add_option("--config", config_path, "analysis config (JSON)");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", options.out_dir, "output directory")->capture_default_str();
  app.add_flag("--no-timestamp", no_timestamp, "omit timestamps from reports");
  app.add_option("--model", options.model_files, "model file to analyze (repeatable)");

  auto fail = [](std::string_view code, const std::string& message, int status) {
    std::string line(message);
    std::replace(line.begin(), line.end(), '\n', ' ');
    std::cerr << "error[" << code << "]: " << line << "\n";
    return status;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("E_USAGE", e.what(), 1);
  }
  options.timestamp = !no_timestamp;

  if (const char* env = std::getenv("PCEPERF_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (*env == '\0' || *end != '\0' || value < 1 || value > 1024) {
      return fail("E_USAGE", fmt::format("PCEPERF_THREADS must be an integer in [1, 1024], got '{}'", env), 1);
    }
    options.threads = static_cast<unsigned>(value);
  }

  try {
    std::optional<AnalysisConfig> config;
    if (!config_path.empty()) {
      config = load_config(config_path);
      if (seed) config->seed = *seed;
    }
    if (command == "analyze") {
      cmd_analyze(options.model_files, options, config);
      return 0;
    }
    if (!config) return fail("E_USAGE", fmt::format("{} needs --config <path>", command), 1);
    if (command == "fit") cmd_fit(*config, options);
    else if (command == "mc") cmd_mc(*config, options);
    else if (command == "sweep-samples") cmd_accuracy_sweep(*config, options);
    else if (command == "sweep-noise") cmd_noise_sweep(*config, options);
    else cmd_pdf(*config, options);
    return 0;
  } catch (const Error& e) {
    return fail(to_string(e.code()), e.what(), exit_status(e));
  } catch (const std::exception& e) {
    return fail("E_INTERNAL", e.what(), 2);
  }
}

}  // namespace pceperf::cli
