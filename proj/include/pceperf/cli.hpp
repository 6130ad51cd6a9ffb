#ifndef PCEPERF_CLI_HPP
#define PCEPERF_CLI_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "pceperf/error.hpp"
#include "pceperf/inputspace.hpp"
#include "pceperf/montecarlo.hpp"
#include "pceperf/pce.hpp"
#include "pceperf/sysmodel.hpp"

namespace pceperf::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// A model knob in the config: a constant, a parameter name, or
/// {"param": name, "scale": s}.
struct ParamBinding {
  std::string param;
  double scale = 1.0;
};
using Binding = std::variant<double, ParamBinding>;

struct Mm1Block {
  Binding arrival_rate;
  Binding service_time;
};

struct StationBlock {
  std::string name;
  Binding demand;
};

struct MvaBlock {
  std::vector<StationBlock> stations;
  Binding think_time = 0.0;
  Binding population = 1.0;
};

struct DatasetBlock {
  std::string path;  // relative paths resolve against the config file's directory
  std::vector<std::string> input_columns;
  std::vector<std::string> output_columns;
  sysmodel::MatchMode match = sysmodel::MatchMode::Exact;
};

struct ExternalBlock {
  std::vector<std::string> command;
  std::vector<std::string> outputs;
  double timeout_s = 600.0;
};

using ModelBlock = std::variant<Mm1Block, MvaBlock, DatasetBlock, ExternalBlock>;

struct PceBlock {
  std::optional<unsigned> degree;  // empty means "auto"
  unsigned d_max = 30;
  std::size_t samples = 200;
  pce::FitMethod fit = pce::FitMethod::Regression;
  std::optional<unsigned> sparse_level;
};

struct AnalysisConfig {
  std::shared_ptr<const inputspace::ProblemSpec> problem;
  ModelBlock model;
  std::vector<std::string> indices;
  PceBlock pce;
  montecarlo::McConfig mc;  // mc.seed is derived from `seed`
  std::vector<double> ran_levels{20.0, 10.0, 5.0, 1.0};
  std::vector<std::size_t> sample_counts{100, 300, 700, 1000};
  std::size_t pdf_points = 200;
  std::uint64_t seed = 0;
  std::string base_dir;  // not serialized
};

/// Output names the configured model will produce.
std::vector<std::string> model_outputs(const ModelBlock& model);

AnalysisConfig config_from_json(const nlohmann::json& doc, const std::string& base_dir = "");
nlohmann::json to_json(const AnalysisConfig& config);
AnalysisConfig load_config(const std::string& path);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const AnalysisConfig& config);

std::unique_ptr<sysmodel::PerformanceModel> build_model(const AnalysisConfig& config);

/// Seeds for the independent random consumers of one run.
enum class SeedStream : std::uint64_t { Samples = 0, MonteCarlo = 1, Noise = 2 };
std::uint64_t stream_seed(const AnalysisConfig& config, SeedStream stream);

struct RunOptions {
  std::string out_dir = ".";
  bool timestamp = true;
  unsigned threads = 1;
  std::vector<std::string> model_files;  // analyze only
};

/// Failure carrying the process exit status it maps to.
class CliError : public Error {
 public:
  CliError(ErrorCode code, int exit_status, const std::string& message)
      : Error(code, message), exit_status_(exit_status) {}
  int exit_status() const noexcept { return exit_status_; }

 private:
  int exit_status_;
};

/// 1 for usage and configuration problems, 3 for evaluator failures,
/// 2 for every numerical failure.
int exit_status(const Error& error) noexcept;

// Commands. Each writes its reports below options.out_dir and returns the
// JSON report it wrote.
nlohmann::json cmd_fit(const AnalysisConfig& config, const RunOptions& options);
nlohmann::json cmd_analyze(const std::vector<std::string>& model_files, const RunOptions& options,
                           const std::optional<AnalysisConfig>& config = std::nullopt);
nlohmann::json cmd_mc(const AnalysisConfig& config, const RunOptions& options);
nlohmann::json cmd_accuracy_sweep(const AnalysisConfig& config, const RunOptions& options);
nlohmann::json cmd_noise_sweep(const AnalysisConfig& config, const RunOptions& options);
nlohmann::json cmd_pdf(const AnalysisConfig& config, const RunOptions& options);

/// File name of the model written by `fit` for an index.
std::string model_file_name(const std::string& index);

/// Full command-line entry point; returns the process exit status.
int main(int argc, char** argv);

}  // namespace pceperf::cli

#endif  // PCEPERF_CLI_HPP
