#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json_util.hpp"
#include "pceperf/cli.hpp"
#include "pceperf/random.hpp"

namespace pceperf::cli {

using nlohmann::json;
using detail::bad_field;

namespace {

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
  if (!obj.is_object()) bad_field(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) bad_field(path + "." + key, "unknown field");
  }
}

std::string require_name(const json& v, const std::string& path) {
  if (!v.is_string() || v.get<std::string>().empty()) bad_field(path, "expected a non-empty string");
  return v.get<std::string>();
}

std::vector<std::string> string_list(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = detail::require(obj, key, path);
  if (!v.is_array()) bad_field(path + "." + key, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(require_name(v[i], fmt::format("{}.{}[{}]", path, key, i)));
  return out;
}

Binding parse_binding(const json& v, const std::string& path, const inputspace::ProblemSpec& problem) {
  auto check = [&](const std::string& name, const std::string& where) {
    if (problem.find(name) == problem.dimension()) bad_field(where, fmt::format("unknown parameter '{}'", name));
  };
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    check(v.get<std::string>(), path);
    return ParamBinding{v.get<std::string>(), 1.0};
  }
  if (v.is_object()) {
    reject_unknown(v, path, {"param", "scale"});
    ParamBinding b{detail::require_string(v, "param", path), 1.0};
    check(b.param, path + ".param");
    if (v.contains("scale")) b.scale = detail::require_number(v, "scale", path);
    return b;
  }
  bad_field(path, "expected a number, a parameter name or {\"param\", \"scale\"}");
}

json binding_to_json(const Binding& b) {
  if (const auto* c = std::get_if<double>(&b)) return *c;
  const auto& p = std::get<ParamBinding>(b);
  if (p.scale == 1.0) return p.param;
  return json{{"param", p.param}, {"scale", p.scale}};
}

unsigned require_unsigned(const json& obj, const std::string& key, const std::string& path, unsigned lo) {
  const auto v = detail::require_natural(obj, key, path);
  if (v < lo || v > 0xffffffffu) bad_field(path + "." + key, fmt::format("expected an integer >= {}", lo));
  return static_cast<unsigned>(v);
}

ModelBlock parse_model(const json& doc, const inputspace::ProblemSpec& problem) {
  const std::string path = "model";
  const auto type = detail::require_string(doc, "type", path);
  if (type == "mm1") {
    reject_unknown(doc, path, {"type", "arrival_rate", "service_time"});
    return Mm1Block{parse_binding(detail::require(doc, "arrival_rate", path), path + ".arrival_rate", problem),
                    parse_binding(detail::require(doc, "service_time", path), path + ".service_time", problem)};
  }
  if (type == "mva") {
    reject_unknown(doc, path, {"type", "stations", "think_time", "population"});
    MvaBlock block;
    const auto& stations = detail::require(doc, "stations", path);
    if (!stations.is_array() || stations.empty()) bad_field(path + ".stations", "expected a non-empty array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < stations.size(); ++i) {
      const auto where = fmt::format("{}.stations[{}]", path, i);
      reject_unknown(stations[i], where, {"name", "demand"});
      StationBlock s{require_name(detail::require(stations[i], "name", where), where + ".name"),
                     parse_binding(detail::require(stations[i], "demand", where), where + ".demand", problem)};
      if (!seen.insert(s.name).second) bad_field(where + ".name", fmt::format("duplicate station '{}'", s.name));
      block.stations.push_back(std::move(s));
    }
    if (doc.contains("think_time")) block.think_time = parse_binding(doc["think_time"], path + ".think_time", problem);
    block.population = parse_binding(detail::require(doc, "population", path), path + ".population", problem);
    return block;
  }
  if (type == "dataset") {
    reject_unknown(doc, path, {"type", "path", "input_columns", "output_columns", "match"});
    DatasetBlock block;
    block.path = detail::require_string(doc, "path", path);
    block.input_columns = string_list(doc, "input_columns", path);
    if (block.input_columns.size() != problem.dimension()) {
      bad_field(path + ".input_columns",
                fmt::format("expected {} columns, one per problem parameter", problem.dimension()));
    }
    block.output_columns = string_list(doc, "output_columns", path);
    if (doc.contains("match")) {
      const auto match = detail::require_string(doc, "match", path);
      if (match == "exact") block.match = sysmodel::MatchMode::Exact;
      else if (match == "nearest") block.match = sysmodel::MatchMode::Nearest;
      else bad_field(path + ".match", "expected \"exact\" or \"nearest\"");
    }
    return block;
  }
  if (type == "external") {
    reject_unknown(doc, path, {"type", "command", "outputs", "timeout_s"});
    ExternalBlock block;
    block.command = string_list(doc, "command", path);
    if (block.command.empty()) bad_field(path + ".command", "expected a non-empty argv list");
    block.outputs = string_list(doc, "outputs", path);
    if (block.outputs.empty()) bad_field(path + ".outputs", "expected at least one output name");
    if (doc.contains("timeout_s")) {
      block.timeout_s = detail::require_number(doc, "timeout_s", path);
      if (!(block.timeout_s > 0.0)) bad_field(path + ".timeout_s", "expected a positive number of seconds");
    }
    return block;
  }
  bad_field(path + ".type", fmt::format("unknown model type '{}' (expected mm1, mva, dataset or external)", type));
}

json model_to_json(const ModelBlock& model) {
  return std::visit(
      [](const auto& block) -> json {
        using T = std::decay_t<decltype(block)>;
        if constexpr (std::is_same_v<T, Mm1Block>) {
          return {{"type", "mm1"},
                  {"arrival_rate", binding_to_json(block.arrival_rate)},
                  {"service_time", binding_to_json(block.service_time)}};
        } else if constexpr (std::is_same_v<T, MvaBlock>) {
          json stations = json::array();
          for (const auto& s : block.stations)
            stations.push_back({{"name", s.name}, {"demand", binding_to_json(s.demand)}});
          return {{"type", "mva"},
                  {"stations", stations},
                  {"think_time", binding_to_json(block.think_time)},
                  {"population", binding_to_json(block.population)}};
        } else if constexpr (std::is_same_v<T, DatasetBlock>) {
          return {{"type", "dataset"},
                  {"path", block.path},
                  {"input_columns", block.input_columns},
                  {"output_columns", block.output_columns},
                  {"match", block.match == sysmodel::MatchMode::Exact ? "exact" : "nearest"}};
        } else {
          return {{"type", "external"},
                  {"command", block.command},
                  {"outputs", block.outputs},
                  {"timeout_s", block.timeout_s}};
        }
      },
      model);
}

}  // namespace

std::vector<std::string> model_outputs(const ModelBlock& model) {
  return std::visit(
      [](const auto& block) -> std::vector<std::string> {
        using T = std::decay_t<decltype(block)>;
        if constexpr (std::is_same_v<T, Mm1Block>) {
          return {"utilization", "response_time", "throughput"};
        } else if constexpr (std::is_same_v<T, MvaBlock>) {
          std::vector<std::string> names{"throughput", "response_time"};
          for (const char* metric : {"utilization", "queue_length", "residence_time"})
            for (const auto& s : block.stations) names.push_back(fmt::format("{}.{}", metric, s.name));
          return names;
        } else if constexpr (std::is_same_v<T, DatasetBlock>) {
          return block.output_columns;
        } else {
          return block.outputs;
        }
      },
      model);
}

AnalysisConfig config_from_json(const json& doc, const std::string& base_dir) {
  reject_unknown(doc, "config", {"problem", "model", "indices", "pce", "mc", "noise", "sweep", "pdf", "seed"});
  AnalysisConfig config;
  config.base_dir = base_dir;
  if (!doc.contains("problem")) bad_field("problem", "missing required field");
  config.problem = std::make_shared<const inputspace::ProblemSpec>(inputspace::problem_from_json(doc["problem"]));
  if (!doc.contains("model")) bad_field("model", "missing required field");
  config.model = parse_model(doc["model"], *config.problem);

  config.indices = string_list(doc, "indices", "config");
  if (config.indices.empty()) bad_field("indices", "expected at least one performance index");
  const auto outputs = model_outputs(config.model);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < config.indices.size(); ++i) {
    const auto& name = config.indices[i];
    if (std::find(outputs.begin(), outputs.end(), name) == outputs.end()) {
      bad_field(fmt::format("indices[{}]", i), fmt::format("model has no output '{}'", name));
    }
    if (!seen.insert(name).second) bad_field(fmt::format("indices[{}]", i), "duplicate index");
  }

  if (doc.contains("pce")) {
    const auto& p = doc["pce"];
    const std::string path = "pce";
    reject_unknown(p, path, {"degree", "d_max", "samples", "fit", "sparse_level"});
    if (p.contains("degree")) {
      if (p["degree"].is_string()) {
        if (p["degree"].get<std::string>() != "auto") bad_field("pce.degree", "expected a natural number or \"auto\"");
      } else {
        config.pce.degree = require_unsigned(p, "degree", path, 0);
      }
    }
    if (p.contains("d_max")) config.pce.d_max = require_unsigned(p, "d_max", path, 1);
    if (p.contains("samples")) config.pce.samples = require_unsigned(p, "samples", path, 2);
    if (p.contains("fit")) {
      const auto fit = detail::require_string(p, "fit", path);
      if (fit != "regression" && fit != "projection") bad_field("pce.fit", "expected \"regression\" or \"projection\"");
      config.pce.fit = pce::fit_method_from_string(fit);
    }
    if (p.contains("sparse_level")) config.pce.sparse_level = require_unsigned(p, "sparse_level", path, 0);
  }
  if (config.pce.fit == pce::FitMethod::Projection && !config.pce.degree) {
    bad_field("pce.degree", "projection needs an explicit degree");
  }
  if (config.pce.fit == pce::FitMethod::Regression && config.pce.sparse_level) {
    bad_field("pce.sparse_level", "only used with fit \"projection\"");
  }

  if (doc.contains("mc")) {
    const auto& m = doc["mc"];
    const std::string path = "mc";
    reject_unknown(m, path, {"tolerance", "alpha", "min_samples", "max_samples"});
    if (m.contains("tolerance")) config.mc.tolerance = detail::require_number(m, "tolerance", path);
    if (m.contains("alpha")) config.mc.alpha = detail::require_number(m, "alpha", path);
    if (m.contains("min_samples")) config.mc.min_samples = detail::require_natural(m, "min_samples", path);
    if (m.contains("max_samples")) config.mc.max_samples = detail::require_natural(m, "max_samples", path);
    montecarlo::validate(config.mc);
  }

  if (doc.contains("noise")) {
    reject_unknown(doc["noise"], "noise", {"ran_levels"});
    config.ran_levels = detail::require_number_list(doc["noise"], "ran_levels", "noise");
    if (config.ran_levels.empty()) bad_field("noise.ran_levels", "expected at least one level");
    for (std::size_t i = 0; i < config.ran_levels.size(); ++i)
      if (!(config.ran_levels[i] > 0.0)) bad_field(fmt::format("noise.ran_levels[{}]", i), "expected a positive number");
  }

  if (doc.contains("sweep")) {
    reject_unknown(doc["sweep"], "sweep", {"sample_counts"});
    const auto& counts = detail::require(doc["sweep"], "sample_counts", "sweep");
    if (!counts.is_array() || counts.empty()) bad_field("sweep.sample_counts", "expected a non-empty array");
    config.sample_counts.clear();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const auto where = fmt::format("sweep.sample_counts[{}]", i);
      if (!counts[i].is_number_unsigned() || counts[i].get<std::uint64_t>() < 2) bad_field(where, "expected an integer >= 2");
      config.sample_counts.push_back(counts[i].get<std::size_t>());
    }
  }

  if (doc.contains("pdf")) {
    reject_unknown(doc["pdf"], "pdf", {"points"});
    config.pdf_points = require_unsigned(doc["pdf"], "points", "pdf", 2);
  }

  if (doc.contains("seed")) config.seed = detail::require_natural(doc, "seed", "config");
  return config;
}

json to_json(const AnalysisConfig& config) {
  json doc;
  doc["problem"] = inputspace::to_json(*config.problem);
  doc["model"] = model_to_json(config.model);
  doc["indices"] = config.indices;
  json p;
  if (config.pce.degree) p["degree"] = *config.pce.degree;
  else p["degree"] = "auto";
  p["d_max"] = config.pce.d_max;
  p["samples"] = config.pce.samples;
  p["fit"] = pce::to_string(config.pce.fit);
  if (config.pce.sparse_level) p["sparse_level"] = *config.pce.sparse_level;
  doc["pce"] = p;
  doc["mc"] = {{"tolerance", config.mc.tolerance},
               {"alpha", config.mc.alpha},
               {"min_samples", config.mc.min_samples},
               {"max_samples", config.mc.max_samples}};
  doc["noise"] = {{"ran_levels", config.ran_levels}};
  doc["sweep"] = {{"sample_counts", config.sample_counts}};
  doc["pdf"] = {{"points", config.pdf_points}};
  doc["seed"] = config.seed;
  return doc;
}

AnalysisConfig load_config(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::Io, fmt::format("cannot open config '{}'", path));
  std::stringstream buffer;
  buffer << file.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, fmt::format("{}: {}", path, e.what()));
  }
  return config_from_json(doc, std::filesystem::path(path).parent_path().string());
}

std::string config_hash(const AnalysisConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json(config).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::uint64_t stream_seed(const AnalysisConfig& config, SeedStream stream) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(stream));
}

std::unique_ptr<sysmodel::PerformanceModel> build_model(const AnalysisConfig& config) {
  auto quantity = [&](const Binding& b) -> sysmodel::Quantity {
    if (const auto* c = std::get_if<double>(&b)) return *c;
    const auto& p = std::get<ParamBinding>(b);
    return sysmodel::ParamRef{config.problem->find(p.param), p.scale};
  };
  return std::visit(
      [&](const auto& block) -> std::unique_ptr<sysmodel::PerformanceModel> {
        using T = std::decay_t<decltype(block)>;
        if constexpr (std::is_same_v<T, Mm1Block>) {
          return std::make_unique<sysmodel::Mm1Model>(quantity(block.arrival_rate), quantity(block.service_time));
        } else if constexpr (std::is_same_v<T, MvaBlock>) {
          std::vector<sysmodel::StationBinding> stations;
          for (const auto& s : block.stations) stations.push_back({s.name, quantity(s.demand)});
          return std::make_unique<sysmodel::MvaModel>(std::move(stations), quantity(block.think_time),
                                                      quantity(block.population));
        } else if constexpr (std::is_same_v<T, DatasetBlock>) {
          std::filesystem::path path(block.path);
          if (path.is_relative() && !config.base_dir.empty()) path = std::filesystem::path(config.base_dir) / path;
          return std::make_unique<sysmodel::DatasetModel>(
              sysmodel::DatasetSpec{path.string(), block.input_columns, block.output_columns, block.match});
        } else {
          return std::make_unique<sysmodel::ExternalModel>(
              block.command, block.outputs,
              std::chrono::milliseconds(static_cast<std::int64_t>(block.timeout_s * 1000.0)));
        }
      },
      config.model);
}

}  // namespace pceperf::cli
