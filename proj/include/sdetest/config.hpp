#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "sdetest/error.hpp"
#include "sdetest/format.hpp"
#include "sdetest/hypothesis_tests.hpp"
#include "sdetest/montecarlo.hpp"

namespace sdetest {

/// `key = value` lines; `#` starts a comment. Duplicate keys are an error.
inline std::map<std::string, std::string> parse_flat_config(std::istream& is) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const auto where = "config line " + std::to_string(lineno);
    require(eq != std::string_view::npos, where + ": expected 'key = value'");
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    require(!key.empty(), where + ": empty key");
    require(out.emplace(key, value).second, where + ": duplicate key '" + key + "'");
  }
  return out;
}

/// ExperimentConfig plus the settings that do not affect results.
struct CliConfig {
  ExperimentConfig experiment;
  std::size_t workers = 1;
  std::string output_csv;
  std::string output_echo;
};

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys = {
      "model.id",       "model.theta0",   "model.box.lower",   "model.box.upper", "model.contrast",
      "sim.n",          "sim.delta",      "sim.refine",        "sim.x0",          "mc.replications",
      "mc.seed",        "mc.level",       "mc.h_grid",         "mc.h_direction",  "mc.statistics",
      "mc.threshold_mode", "mc.workers",  "output.csv",        "output.echo"};
  return keys;
}

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline Contrast parse_contrast(const std::string& s) {
  if (s == "corrected") return Contrast::corrected;
  if (s == "local_gaussian") return Contrast::local_gaussian;
  throw Error(ErrorCode::invalid_argument, "unknown contrast '" + s + "' (expected corrected or local_gaussian)");
}

inline std::string to_string(Contrast c) { return c == Contrast::corrected ? "corrected" : "local_gaussian"; }

}  // namespace detail

/// Builds a validated CliConfig; unknown keys are rejected.
inline CliConfig cli_config_from_entries(const std::map<std::string, std::string>& entries) {
  for (const auto& [key, value] : entries) {
    require(config_keys().count(key) == 1, "unknown config key '" + key + "'");
  }
  const auto get = [&](const std::string& key) -> const std::string* {
    const auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };
  const auto with_key = [](const std::string& key, auto&& parse) {
    try {
      return parse();
    } catch (const Error& e) {
      throw Error(ErrorCode::invalid_argument, key + ": " + e.what());
    }
  };

  CliConfig out;
  ExperimentConfig& x = out.experiment;
  if (auto v = get("model.id")) x.model_id = detail::lower(*v);
  x.theta0 = with_key("model.id", [&] { return reference_theta0(x.model_id); });
  if (auto v = get("model.theta0")) {
    x.theta0 = with_key("model.theta0", [&] { return ParamVector::from_flat(parse_double_list(*v), 2); });
  }
  if (get("model.box.lower") || get("model.box.upper")) {
    require(get("model.box.lower") && get("model.box.upper"), "model.box.lower and model.box.upper go together");
    x.box = with_key("model.box", [&] {
      return ParamBox(parse_double_list(*get("model.box.lower")), parse_double_list(*get("model.box.upper")));
    });
  }
  if (auto v = get("model.contrast")) x.contrast = with_key("model.contrast", [&] { return detail::parse_contrast(*v); });
  if (auto v = get("sim.n")) x.n = with_key("sim.n", [&] { return parse_uint(*v); });
  if (auto v = get("sim.delta")) x.delta = with_key("sim.delta", [&] { return parse_double(*v); });
  if (auto v = get("sim.refine")) x.refine = with_key("sim.refine", [&] { return parse_uint(*v); });
  if (auto v = get("sim.x0")) x.x0 = with_key("sim.x0", [&] { return parse_double(*v); });
  if (auto v = get("mc.replications")) x.replications = with_key("mc.replications", [&] { return parse_uint(*v); });
  if (auto v = get("mc.seed")) x.master_seed = with_key("mc.seed", [&] { return parse_uint(*v); });
  if (auto v = get("mc.level")) x.level = with_key("mc.level", [&] { return parse_double(*v); });
  if (auto v = get("mc.h_grid")) x.h_grid = with_key("mc.h_grid", [&] { return parse_double_list(*v); });
  if (auto v = get("mc.h_direction")) x.h_direction = with_key("mc.h_direction", [&] { return parse_double_list(*v); });
  if (auto v = get("mc.statistics")) {
    x.statistics.clear();
    for (auto field : split(*v, ',')) {
      const StatKind kind = with_key("mc.statistics", [&] { return parse_stat_kind(trim(field)); });
      require(std::find(x.statistics.begin(), x.statistics.end(), kind) == x.statistics.end(),
              "mc.statistics: duplicate statistic " + to_string(kind));
      x.statistics.push_back(kind);
    }
  }
  if (auto v = get("mc.threshold_mode")) {
    x.threshold_mode = with_key("mc.threshold_mode", [&] { return parse_threshold_mode(*v); });
  }
  if (auto v = get("mc.workers")) out.workers = with_key("mc.workers", [&] { return parse_uint(*v); });
  if (auto v = get("output.csv")) out.output_csv = *v;
  if (auto v = get("output.echo")) out.output_echo = *v;
  require(out.workers >= 1, "mc.workers must be at least 1");
  x.validate();
  return out;
}

inline CliConfig load_cli_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::invalid_argument, "cannot open config file '" + file + "'");
  return cli_config_from_entries(parse_flat_config(in));
}

/// Flat `key = value` echo of the result-determining settings, keys sorted.
inline void write_config_echo(std::ostream& os, const ExperimentConfig& x) {
  std::map<std::string, std::string> kv;
  kv["model.id"] = x.model_id;
  kv["model.theta0"] = format_double_list(x.theta0.flat());
  kv["model.box.lower"] = format_double_list(x.box.lower());
  kv["model.box.upper"] = format_double_list(x.box.upper());
  kv["model.contrast"] = detail::to_string(x.contrast);
  kv["sim.n"] = std::to_string(x.n);
  kv["sim.delta"] = format_double(x.step());
  kv["sim.refine"] = std::to_string(x.refine);
  kv["sim.x0"] = format_double(x.x0);
  kv["mc.replications"] = std::to_string(x.replications);
  kv["mc.seed"] = std::to_string(x.master_seed);
  kv["mc.level"] = format_double(x.level);
  kv["mc.h_grid"] = format_double_list(x.h_grid);
  if (!x.h_direction.empty()) kv["mc.h_direction"] = format_double_list(x.h_direction);
  std::string stats;
  for (std::size_t i = 0; i < x.statistics.size(); ++i) stats += (i ? "," : "") + to_string(x.statistics[i]);
  kv["mc.statistics"] = stats;
  kv["mc.threshold_mode"] = to_string(x.threshold_mode);
  for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

}  // namespace sdetest
