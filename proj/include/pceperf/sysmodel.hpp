#ifndef PCEPERF_SYSMODEL_HPP
#define PCEPERF_SYSMODEL_HPP

// Black-box performance models. Every model maps a physical input vector
// (ordered as the ProblemSpec parameters) onto a vector of named indices.

#include <chrono>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pceperf/inputspace.hpp"

namespace pceperf::sysmodel {

class PerformanceModel {
 public:
  virtual ~PerformanceModel() = default;

  virtual const std::vector<std::string>& output_names() const = 0;
  /// Must be deterministic. Thread-safe for concurrent calls.
  virtual std::vector<double> evaluate(std::span<const double> inputs) const = 0;
  /// Human-readable notes on input conversions (rounding etc.).
  virtual std::vector<std::string> notes() const { return {}; }

  /// Position of `name` in output_names(); throws Config when absent.
  std::size_t output_index(const std::string& name) const;
};

/// Evaluates every row of `inputs` with up to `threads` concurrent calls.
/// Results keep row order; the lowest failing row is reported as an
/// EvaluationError.
Eigen::MatrixXd evaluate_all(const PerformanceModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                             unsigned threads = 1);

/// A model input: a constant or `scale * param`.
struct ParamRef {
  std::size_t index;
  double scale = 1.0;
};
using Quantity = std::variant<double, ParamRef>;
double resolve(const Quantity& q, std::span<const double> inputs);

// ---------------------------------------------------------------------------
// M/M/1

struct Mm1Metrics {
  double utilization;
  double response_time;
  double throughput;
};

/// Open single-server queue. Throws Instability when lambda * S >= 1.
Mm1Metrics mm1_metrics(double arrival_rate, double service_time);

class Mm1Model final : public PerformanceModel {
 public:
  Mm1Model(Quantity arrival_rate, Quantity service_time);
  const std::vector<std::string>& output_names() const override { return names_; }
  std::vector<double> evaluate(std::span<const double> inputs) const override;

 private:
  Quantity arrival_rate_;
  Quantity service_time_;
  std::vector<std::string> names_{"utilization", "response_time", "throughput"};
};

// ---------------------------------------------------------------------------
// Closed product-form network solved by exact MVA

struct Station {
  std::string name;
  double demand;
};

struct ClosedNetworkSpec {
  std::vector<Station> stations;
  double think_time = 0.0;
  unsigned population = 1;
};

void validate(const ClosedNetworkSpec& spec);

struct StationResult {
  double utilization;
  double queue_length;
  double residence_time;
};

struct MvaResult {
  std::vector<StationResult> stations;
  double throughput;
  double response_time;
};

MvaResult mva_solve(const ClosedNetworkSpec& spec);

struct StationBinding {
  std::string name;
  Quantity demand;
};

/// MVA-backed model. A continuous population input is rounded half-to-even.
/// Outputs: throughput, response_time, then utilization.<station>,
/// queue_length.<station>, residence_time.<station> per station.
class MvaModel final : public PerformanceModel {
 public:
  MvaModel(std::vector<StationBinding> stations, Quantity think_time, Quantity population);
  const std::vector<std::string>& output_names() const override { return names_; }
  std::vector<double> evaluate(std::span<const double> inputs) const override;
  std::vector<std::string> notes() const override;

 private:
  std::vector<StationBinding> stations_;
  Quantity think_time_;
  Quantity population_;
  std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// Measured dataset lookup

enum class MatchMode { Exact, Nearest };

struct DatasetSpec {
  std::string path;
  std::vector<std::string> input_columns;   // in ProblemSpec order
  std::vector<std::string> output_columns;  // index names
  MatchMode match = MatchMode::Exact;
};

/// Parsed CSV: a header row of unique names, then numeric rows. Lines whose
/// first non-blank character is '#' and blank lines are ignored.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable parse_csv(const std::string& text, const std::string& origin = "<csv>");
CsvTable read_csv(const std::string& path);

class DatasetModel final : public PerformanceModel {
 public:
  explicit DatasetModel(const DatasetSpec& spec);
  DatasetModel(const DatasetSpec& spec, const CsvTable& table);

  const std::vector<std::string>& output_names() const override { return spec_.output_columns; }
  std::vector<double> evaluate(std::span<const double> inputs) const override;

  std::size_t row_count() const noexcept { return inputs_.size(); }
  /// Index of the row selected for `inputs`.
  std::size_t match_row(std::span<const double> inputs) const;
  const std::vector<double>& row_inputs(std::size_t row) const { return inputs_.at(row); }
  const std::vector<double>& row_outputs(std::size_t row) const { return outputs_.at(row); }

 private:
  double normalized_distance(std::size_t row, std::span<const double> inputs) const;

  DatasetSpec spec_;
  std::vector<std::vector<double>> inputs_;
  std::vector<std::vector<double>> outputs_;
  std::vector<double> col_min_;
  std::vector<double> col_range_;
};

/// Evaluates one row of the dataset without constructing a model.
std::vector<double> dataset_eval(const DatasetModel& dataset, std::span<const double> inputs);

// ---------------------------------------------------------------------------
// External command

/// Formats a CSV line of values at 17 significant digits.
std::string format_csv_line(std::span<const double> values);

/// Runs `argv`, writes one CSV line of inputs to its standard input and reads
/// one CSV line of outputs from its standard output.
std::vector<double> external_eval(const std::vector<std::string>& argv, std::span<const double> inputs,
                                  std::size_t expected_outputs,
                                  std::chrono::milliseconds timeout = std::chrono::seconds(600));

class ExternalModel final : public PerformanceModel {
 public:
  ExternalModel(std::vector<std::string> argv, std::vector<std::string> output_names,
                std::chrono::milliseconds timeout = std::chrono::seconds(600));
  const std::vector<std::string>& output_names() const override { return names_; }
  std::vector<double> evaluate(std::span<const double> inputs) const override;

 private:
  std::vector<std::string> argv_;
  std::vector<std::string> names_;
  std::chrono::milliseconds timeout_;
};

}  // namespace pceperf::sysmodel

#endif  // PCEPERF_SYSMODEL_HPP
