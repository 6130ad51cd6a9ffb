#include "pceperf/sysmodel.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "pceperf/error.hpp"

namespace pceperf::sysmodel {

std::size_t PerformanceModel::output_index(const std::string& name) const {
  const auto& names = output_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw Error(ErrorCode::Config, fmt::format("model has no output named '{}'", name));
  }
  return static_cast<std::size_t>(it - names.begin());
}

Eigen::MatrixXd evaluate_all(const PerformanceModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                             unsigned threads) {
  const auto n = static_cast<std::size_t>(inputs.rows());
  const auto width = static_cast<Eigen::Index>(model.output_names().size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), width);
  std::vector<std::optional<std::string>> failures(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    std::vector<double> row(static_cast<std::size_t>(inputs.cols()));
    for (std::size_t k = next++; k < n; k = next++) {
      for (Eigen::Index j = 0; j < inputs.cols(); ++j) row[j] = inputs(static_cast<Eigen::Index>(k), j);
      try {
        const auto values = model.evaluate(row);
        if (static_cast<Eigen::Index>(values.size()) != width) {
          throw Error(ErrorCode::Evaluation, "model returned the wrong number of outputs");
        }
        for (Eigen::Index j = 0; j < width; ++j) out(static_cast<Eigen::Index>(k), j) = values[j];
      } catch (const std::exception& e) {
        failures[k] = e.what();
      }
    }
  };

  const unsigned pool = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < pool; ++t) workers.emplace_back(worker);
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (failures[k]) throw EvaluationError(k, *failures[k]);
  }
  return out;
}

double resolve(const Quantity& q, std::span<const double> inputs) {
  if (const auto* c = std::get_if<double>(&q)) return *c;
  const auto& ref = std::get<ParamRef>(q);
  if (ref.index >= inputs.size()) {
    throw Error(ErrorCode::Domain, fmt::format("input index {} out of range", ref.index));
  }
  return ref.scale * inputs[ref.index];
}

// ---------------------------------------------------------------------------

Mm1Metrics mm1_metrics(double arrival_rate, double service_time) {
  if (!(arrival_rate > 0.0) || !(service_time > 0.0)) {
    throw Error(ErrorCode::Domain,
                fmt::format("M/M/1 needs arrival_rate > 0 and service_time > 0 (got {}, {})",
                            arrival_rate, service_time));
  }
  const double u = arrival_rate * service_time;
  if (u >= 1.0) {
    throw Error(ErrorCode::Instability,
                fmt::format("M/M/1 unstable: arrival_rate {} * service_time {} = {} >= 1", arrival_rate,
                            service_time, u));
  }
  return {u, service_time / (1.0 - u), arrival_rate};
}

Mm1Model::Mm1Model(Quantity arrival_rate, Quantity service_time)
    : arrival_rate_(arrival_rate), service_time_(service_time) {}

std::vector<double> Mm1Model::evaluate(std::span<const double> inputs) const {
  const auto m = mm1_metrics(resolve(arrival_rate_, inputs), resolve(service_time_, inputs));
  return {m.utilization, m.response_time, m.throughput};
}

// ---------------------------------------------------------------------------

void validate(const ClosedNetworkSpec& spec) {
  if (spec.stations.empty()) throw Error(ErrorCode::Config, "closed network needs at least one station");
  for (const auto& s : spec.stations) {
    if (!(s.demand > 0.0) || !std::isfinite(s.demand)) {
      throw Error(ErrorCode::Domain,
                  fmt::format("station '{}' has non-positive service demand {}", s.name, s.demand));
    }
  }
  if (!(spec.think_time >= 0.0)) throw Error(ErrorCode::Domain, "think time must be >= 0");
  if (spec.population < 1) throw Error(ErrorCode::Domain, "population must be >= 1");
}

MvaResult mva_solve(const ClosedNetworkSpec& spec) {
  validate(spec);
  const std::size_t k = spec.stations.size();
  std::vector<double> queue(k, 0.0);
  std::vector<double> residence(k, 0.0);
  double throughput = 0.0;
  double response = 0.0;
  for (unsigned n = 1; n <= spec.population; ++n) {
    response = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      residence[s] = spec.stations[s].demand * (1.0 + queue[s]);
      response += residence[s];
    }
    throughput = n / (spec.think_time + response);
    for (std::size_t s = 0; s < k; ++s) queue[s] = throughput * residence[s];
  }
  MvaResult result{{}, throughput, response};
  result.stations.reserve(k);
  for (std::size_t s = 0; s < k; ++s) {
    result.stations.push_back({throughput * spec.stations[s].demand, queue[s], residence[s]});
  }
  return result;
}

MvaModel::MvaModel(std::vector<StationBinding> stations, Quantity think_time, Quantity population)
    : stations_(std::move(stations)), think_time_(think_time), population_(population) {
  if (stations_.empty()) throw Error(ErrorCode::Config, "closed network needs at least one station");
  names_ = {"throughput", "response_time"};
  std::set<std::string> seen;
  for (const auto& s : stations_) {
    if (!seen.insert(s.name).second) {
      throw Error(ErrorCode::Config, fmt::format("duplicate station name '{}'", s.name));
    }
  }
  for (const char* metric : {"utilization", "queue_length", "residence_time"}) {
    for (const auto& s : stations_) names_.push_back(fmt::format("{}.{}", metric, s.name));
  }
}

std::vector<double> MvaModel::evaluate(std::span<const double> inputs) const {
  ClosedNetworkSpec spec;
  for (const auto& s : stations_) spec.stations.push_back({s.name, resolve(s.demand, inputs)});
  spec.think_time = resolve(think_time_, inputs);
  // Default floating-point environment rounds to nearest, ties to even.
  const double population = std::nearbyint(resolve(population_, inputs));
  if (!(population >= 1.0) || population > 1e7) {
    throw Error(ErrorCode::Domain, fmt::format("population {} outside [1, 1e7]", population));
  }
  spec.population = static_cast<unsigned>(population);
  const auto r = mva_solve(spec);
  std::vector<double> out{r.throughput, r.response_time};
  for (const auto& s : r.stations) out.push_back(s.utilization);
  for (const auto& s : r.stations) out.push_back(s.queue_length);
  for (const auto& s : r.stations) out.push_back(s.residence_time);
  return out;
}

std::vector<std::string> MvaModel::notes() const {
  if (std::holds_alternative<ParamRef>(population_)) {
    return {"population is a continuous input; it is rounded half-to-even before solving"};
  }
  return {};
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

bool nearly_equal(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable table;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_commas(line);
    if (!have_header) {
      std::set<std::string> seen;
      for (auto f : fields) {
        if (f.empty() || !seen.insert(std::string(f)).second) {
          throw Error(ErrorCode::Parse, fmt::format("{}:{}: header names must be unique and non-empty",
                                                    origin, line_no));
        }
        table.header.emplace_back(f);
      }
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorCode::Parse, fmt::format("{}:{}: expected {} fields, found {}", origin, line_no,
                                                table.header.size(), fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto value = parse_double(fields[c]);
      if (!value) {
        throw Error(ErrorCode::Parse, fmt::format("{}:{}: column '{}' is not a number: '{}'", origin,
                                                  line_no, table.header[c], fields[c]));
      }
      row.push_back(*value);
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw Error(ErrorCode::Parse, fmt::format("{}: missing header row", origin));
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::Io, fmt::format("cannot open dataset '{}'", path));
  std::stringstream buffer;
  buffer << file.rdbuf();
  return parse_csv(buffer.str(), path);
}

DatasetModel::DatasetModel(const DatasetSpec& spec) : DatasetModel(spec, read_csv(spec.path)) {}

DatasetModel::DatasetModel(const DatasetSpec& spec, const CsvTable& table) : spec_(spec) {
  if (table.rows.empty()) {
    throw Error(ErrorCode::Parse, fmt::format("{}: dataset has no rows", spec.path));
  }
  auto column = [&](const std::string& name) {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) {
      throw Error(ErrorCode::Config, fmt::format("{}: dataset has no column '{}'", spec.path, name));
    }
    return static_cast<std::size_t>(it - table.header.begin());
  };
  std::vector<std::size_t> in_cols, out_cols;
  for (const auto& c : spec.input_columns) in_cols.push_back(column(c));
  for (const auto& c : spec.output_columns) out_cols.push_back(column(c));
  for (const auto& row : table.rows) {
    std::vector<double> in, out;
    for (auto c : in_cols) in.push_back(row[c]);
    for (auto c : out_cols) out.push_back(row[c]);
    inputs_.push_back(std::move(in));
    outputs_.push_back(std::move(out));
  }
  const std::size_t m = in_cols.size();
  col_min_.assign(m, 0.0);
  col_range_.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double lo = inputs_[0][j], hi = inputs_[0][j];
    for (const auto& row : inputs_) {
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
    col_min_[j] = lo;
    col_range_[j] = hi - lo;
  }
}

double DatasetModel::normalized_distance(std::size_t row, std::span<const double> inputs) const {
  double total = 0.0;
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    if (col_range_[j] == 0.0) continue;
    const double d = (inputs[j] - inputs_[row][j]) / col_range_[j];
    total += d * d;
  }
  return std::sqrt(total);
}

std::size_t DatasetModel::match_row(std::span<const double> inputs) const {
  if (inputs.size() != spec_.input_columns.size()) {
    throw Error(ErrorCode::Domain, fmt::format("dataset expects {} inputs, got {}",
                                               spec_.input_columns.size(), inputs.size()));
  }
  if (spec_.match == MatchMode::Exact) {
    for (std::size_t r = 0; r < inputs_.size(); ++r) {
      bool same = true;
      for (std::size_t j = 0; j < inputs.size() && same; ++j) same = nearly_equal(inputs[j], inputs_[r][j]);
      if (same) return r;
    }
    // Report the closest candidates to make the miss actionable.
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t r = 0; r < inputs_.size(); ++r) ranked.emplace_back(normalized_distance(r, inputs), r);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string candidates;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
      const auto r = ranked[i].second;
      candidates += fmt::format("{}row {} ({})", i ? "; " : "", r, format_csv_line(inputs_[r]));
    }
    throw Error(ErrorCode::Evaluation, fmt::format("no dataset row matches ({}); nearest: {}",
                                                   format_csv_line(inputs), candidates));
  }
  std::size_t best = 0;
  double best_distance = normalized_distance(0, inputs);
  for (std::size_t r = 1; r < inputs_.size(); ++r) {
    const double d = normalized_distance(r, inputs);
    if (d < best_distance) {
      best_distance = d;
      best = r;
    }
  }
  return best;
}

std::vector<double> DatasetModel::evaluate(std::span<const double> inputs) const {
  return outputs_[match_row(inputs)];
}

std::vector<double> dataset_eval(const DatasetModel& dataset, std::span<const double> inputs) {
  return dataset.evaluate(inputs);
}

// ---------------------------------------------------------------------------

std::string format_csv_line(std::span<const double> values) {
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    line += fmt::format("{:.17g}", values[i]);
  }
  return line;
}

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

struct Pipe {
  int fd[2] = {-1, -1};
  Pipe() {
    if (::pipe2(fd, O_CLOEXEC) != 0) throw Error(ErrorCode::Io, std::string("pipe: ") + std::strerror(errno));
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  void close_read() {
    if (fd[0] >= 0) ::close(fd[0]);
    fd[0] = -1;
  }
  void close_write() {
    if (fd[1] >= 0) ::close(fd[1]);
    fd[1] = -1;
  }
};

struct ChildOutput {
  std::string out;
  std::string err;
  int status = 0;
  bool timed_out = false;
};

ChildOutput run_child(const std::vector<std::string>& argv, const std::string& input,
                      std::chrono::milliseconds timeout) {
  if (argv.empty()) throw Error(ErrorCode::Config, "external command is empty");
  ignore_sigpipe();
  Pipe in, out, err;
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::Io, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in.fd[0], STDIN_FILENO);
    ::dup2(out.fd[1], STDOUT_FILENO);
    ::dup2(err.fd[1], STDERR_FILENO);
    ::execvp(args[0], args.data());
    const char msg[] = "exec failed\n";
    [[maybe_unused]] auto ignored = ::write(STDERR_FILENO, msg, sizeof msg - 1);
    ::_exit(127);
  }
  in.close_read();
  out.close_write();
  err.close_write();

  ChildOutput result;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::size_t written = 0;
  ::fcntl(in.fd[1], F_SETFL, O_NONBLOCK);
  if (input.empty()) in.close_write();

  char buffer[4096];
  while (out.fd[0] >= 0 || err.fd[0] >= 0) {
    std::vector<pollfd> fds;
    if (in.fd[1] >= 0) fds.push_back({in.fd[1], POLLOUT, 0});
    if (out.fd[0] >= 0) fds.push_back({out.fd[0], POLLIN, 0});
    if (err.fd[0] >= 0) fds.push_back({err.fd[0], POLLIN, 0});
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      break;
    }
    const int ready = ::poll(fds.data(), fds.size(), static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) {
      result.timed_out = true;
      break;
    }
    for (const auto& p : fds) {
      if (p.revents == 0) continue;
      if (p.fd == in.fd[1]) {
        const auto w = ::write(in.fd[1], input.data() + written, input.size() - written);
        if (w > 0) written += static_cast<std::size_t>(w);
        if (w < 0 && errno != EAGAIN) written = input.size();
        if (written >= input.size() || (p.revents & (POLLERR | POLLHUP))) in.close_write();
        continue;
      }
      const auto r = ::read(p.fd, buffer, sizeof buffer);
      if (r > 0) {
        (p.fd == out.fd[0] ? result.out : result.err).append(buffer, static_cast<std::size_t>(r));
      } else if (r == 0 || (r < 0 && errno != EAGAIN && errno != EINTR)) {
        if (p.fd == out.fd[0]) out.close_read();
        else err.close_read();
      }
    }
  }
  in.close_write();
  if (result.timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.status = status;
  return result;
}

std::string describe(const ChildOutput& child) {
  return fmt::format("stdout: '{}' stderr: '{}'", trim(child.out), trim(child.err));
}

}  // namespace

std::vector<double> external_eval(const std::vector<std::string>& argv, std::span<const double> inputs,
                                  std::size_t expected_outputs, std::chrono::milliseconds timeout) {
  const auto child = run_child(argv, format_csv_line(inputs) + "\n", timeout);
  if (child.timed_out) {
    throw Error(ErrorCode::Evaluation,
                fmt::format("external command timed out after {} ms; {}", timeout.count(), describe(child)));
  }
  if (!WIFEXITED(child.status) || WEXITSTATUS(child.status) != 0) {
    const int code = WIFEXITED(child.status) ? WEXITSTATUS(child.status) : 128 + WTERMSIG(child.status);
    throw Error(ErrorCode::Evaluation,
                fmt::format("external command exited with status {}; {}", code, describe(child)));
  }
  const auto text = trim(child.out);
  if (text.empty() || text.find('\n') != std::string_view::npos) {
    throw Error(ErrorCode::Evaluation,
                fmt::format("external command must print exactly one line; {}", describe(child)));
  }
  const auto fields = split_commas(text);
  if (fields.size() != expected_outputs) {
    throw Error(ErrorCode::Evaluation, fmt::format("external command printed {} values, expected {}; {}",
                                                   fields.size(), expected_outputs, describe(child)));
  }
  std::vector<double> values;
  for (auto f : fields) {
    const auto v = parse_double(f);
    if (!v) {
      throw Error(ErrorCode::Evaluation,
                  fmt::format("external command printed a malformed value '{}'; {}", f, describe(child)));
    }
    values.push_back(*v);
  }
  return values;
}

ExternalModel::ExternalModel(std::vector<std::string> argv, std::vector<std::string> output_names,
                             std::chrono::milliseconds timeout)
    : argv_(std::move(argv)), names_(std::move(output_names)), timeout_(timeout) {
  if (argv_.empty()) throw Error(ErrorCode::Config, "external command is empty");
  if (names_.empty()) throw Error(ErrorCode::Config, "external model needs at least one output name");
}

std::vector<double> ExternalModel::evaluate(std::span<const double> inputs) const {
  return external_eval(argv_, inputs, names_.size(), timeout_);
}

}  // namespace pceperf::sysmodel
