#pragma once

// Flat key=value configuration files. '#' starts a comment, blank lines are
// ignored, unknown keys are rejected.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "engine.hpp"
#include "genome.hpp"

namespace ulsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What a config file may set: a scenario template plus the experiment
/// knobs that have command-line equivalents.
struct FileConfig {
  ScenarioConfig scenario;
  std::vector<FitnessKind> variants{FitnessKind::F2, FitnessKind::F4};
  int runs = 25;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double to_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string str(v);
    const double d = std::stod(str, &used);
    if (used != str.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  }
}

inline long long to_int(std::string_view key, std::string_view v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("config: '" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
  return out;
}

}  // namespace detail

inline std::vector<FitnessKind> parse_variant_list(std::string_view list) {
  std::vector<FitnessKind> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    const auto item = detail::trim(list.substr(0, comma));
    try {
      out.push_back(parse_fitness_kind(item));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("config: empty fitness list");
  return out;
}

inline std::vector<double> parse_number_list(std::string_view key, std::string_view list) {
  std::vector<double> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    out.push_back(detail::to_double(key, detail::trim(list.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("config: empty list for '" + std::string(key) + "'");
  return out;
}

/// Applies one key to the config. Throws ConfigError on unknown keys or
/// malformed values.
inline void apply_config_key(FileConfig& fc, std::string_view key, std::string_view value) {
  using detail::to_double;
  using detail::to_int;
  auto& s = fc.scenario;
  auto& fp = s.adaptation.fitness;
  auto& pp = s.protocol;
  if (key == "duration") s.duration = to_double(key, value);
  else if (key == "nodes") s.topology.N = static_cast<int>(to_int(key, value));
  else if (key == "initial_clique") s.topology.N0 = static_cast<int>(to_int(key, value));
  else if (key == "links_per_join") s.topology.m = static_cast<int>(to_int(key, value));
  else if (key == "churn_rate") s.churn_rate = to_double(key, value);
  else if (key == "query_rate") s.query_rate = to_double(key, value);
  else if (key == "load") {
    if (value == "static") s.load = LoadProfile::Static;
    else if (value == "changing") s.load = LoadProfile::Changing;
    else throw ConfigError("config: load must be 'static' or 'changing'");
  }
  else if (key == "load_switch_time") s.load_switch_time = to_double(key, value);
  else if (key == "mix") s.mix = to_double(key, value);
  else if (key == "sample_period") s.sample_period = to_double(key, value);
  else if (key == "adaptation_period") s.adaptation.period = to_double(key, value);
  else if (key == "fitness") {
    fc.variants = parse_variant_list(value);
    s.adaptation.kind = fc.variants.front();
  }
  else if (key == "phi0") fp.phi0 = to_double(key, value);
  else if (key == "phi1") fp.phi1 = to_double(key, value);
  else if (key == "phi2") fp.phi2 = to_double(key, value);
  else if (key == "beta") fp.beta = to_double(key, value);
  else if (key == "delta") fp.delta = to_double(key, value);
  else if (key == "gene_max") fp.n = static_cast<int>(to_int(key, value));
  else if (key == "window") pp.genotype_window = static_cast<int>(to_int(key, value));
  else if (key == "qhr_window") pp.qhr_window = static_cast<int>(to_int(key, value));
  else if (key == "hop_latency") pp.hop_latency = to_double(key, value);
  else if (key == "query_timeout") pp.query_timeout = to_double(key, value);
  else if (key == "release_mean") pp.release_mean = to_double(key, value);
  else if (key == "seen_ttl") pp.seen_ttl = to_double(key, value);
  else if (key == "seed") s.seed = static_cast<std::uint64_t>(to_int(key, value));
  else if (key == "runs") fc.runs = static_cast<int>(to_int(key, value));
  else throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

inline FileConfig parse_config(std::istream& in) {
  FileConfig fc;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = detail::trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const auto key = detail::trim(v.substr(0, eq));
    const auto value = detail::trim(v.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    try {
      apply_config_key(fc, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (fc.runs < 1) throw ConfigError("config: runs must be >= 1");
  try {
    fc.scenario.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return fc;
}

inline FileConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline FileConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

}  // namespace ulsim
