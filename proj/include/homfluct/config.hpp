#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "homogenization.hpp"
#include "spectrum.hpp"

namespace homfluct {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command { field_sample, sigma2, corrector, simulate, rates, dist_test, spde_var, validate };

inline const std::vector<std::pair<Command, std::string>>& command_names() {
  static const std::vector<std::pair<Command, std::string>> names{
      {Command::field_sample, "field-sample"}, {Command::sigma2, "sigma2"},
      {Command::corrector, "corrector"},       {Command::simulate, "simulate"},
      {Command::rates, "rates"},               {Command::dist_test, "dist-test"},
      {Command::spde_var, "spde-var"},         {Command::validate, "validate"}};
  return names;
}

inline std::string to_string(Command c) {
  for (const auto& [k, n] : command_names())
    if (k == c) return n;
  return "?";
}

inline Command parse_command(const std::string& s) {
  for (const auto& [k, n] : command_names())
    if (n == s) return k;
  throw ConfigError("unknown command '" + s + "'");
}

struct ExperimentConfig {
  Command command = Command::simulate;
  int dimension = 3;

  FieldSpec::Kind potential = FieldSpec::Kind::gaussian;
  double amplitude = 1.0;
  double rho = 1.0;
  std::size_t modes = 4096;
  ModeSampling sampling = ModeSampling::spectral;
  double shape_radius = 1.0;
  double shape_scale = 1.0;

  InitialCondition::Kind initial = InitialCondition::Kind::constant;
  double initial_value = 1.0;
  std::vector<double> initial_center;  // defaults to the origin
  double initial_width = 1.0;
  double initial_height = 1.0;

  double t = 1.0;
  std::vector<double> x;  // defaults to the origin
  std::vector<double> eps_list{0.4, 0.2, 0.1};
  std::vector<double> lambda_list{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  std::size_t n_omega = 256;
  std::size_t n_paths = 0;  // 0: adaptive
  std::optional<double> dt;  // empty: automatic
  std::uint64_t master_seed = 1;
  std::string output = "out";

  std::size_t pilot_omega = 16;
  std::size_t pilot_paths = 128;
  std::size_t min_paths = 64;
  std::size_t max_paths = 20000;
  double inner_fraction = 1.0 / 3.0;

  std::vector<double> sample_start;  // defaults to the origin
  std::vector<double> sample_end;    // defaults to e₁
  std::size_t sample_points = 201;
  std::size_t sample_omega = 0;

  std::size_t validate_samples = 200000;

  double d5_lambda = 1e-10;
  double d5_path_exponent = 3.0;

  bool operator==(const ExperimentConfig&) const = default;

  SpectrumModel spectrum() const {
    if (potential == FieldSpec::Kind::gaussian)
      return SpectrumModel::gaussian_bump(dimension, amplitude, rho);
    return SpectrumModel::poisson_induced(shape());
  }
  ShapeFunction shape() const { return ShapeFunction(dimension, shape_radius, shape_scale); }

  FieldSpec field() const {
    if (potential == FieldSpec::Kind::gaussian)
      return FieldSpec::gaussian(spectrum(), modes, ModeSamplingOptions{sampling});
    return FieldSpec::poisson(shape());
  }

  InitialCondition initial_condition() const {
    if (initial == InitialCondition::Kind::constant) return InitialCondition::constant(initial_value);
    return InitialCondition::gaussian_bump(initial_center, initial_width, initial_height);
  }

  /// Step in rescaled path time: min(0.05, ℓ²/20) with ℓ the correlation length.
  double resolved_dt() const {
    if (dt) return *dt;
    const double ell = potential == FieldSpec::Kind::gaussian ? 1.0 / rho : shape_radius;
    return std::min(0.05, ell * ell / 20.0);
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": integer out of range");
  }
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false");
}

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Key uint_key(std::string name, T ExperimentConfig::*m) {
  return {name, [=](ExperimentConfig& c, const std::string& v) { c.*m = T(to_uint(name, v)); },
          [=](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

inline Key real_key(std::string name, double ExperimentConfig::*m) {
  return {name, [=](ExperimentConfig& c, const std::string& v) { c.*m = to_double(name, v); },
          [=](const ExperimentConfig& c) { return fmt(c.*m); }};
}

inline Key list_key(std::string name, std::vector<double> ExperimentConfig::*m) {
  return {name, [=](ExperimentConfig& c, const std::string& v) { c.*m = to_list(name, v); },
          [=](const ExperimentConfig& c) { return fmt(c.*m); }};
}

inline const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  static const std::vector<Key> k{
      {"command", [](C& c, const std::string& v) { c.command = parse_command(v); },
       [](const C& c) { return to_string(c.command); }},
      {"dimension",
       [](C& c, const std::string& v) { c.dimension = int(to_uint("dimension", v)); },
       [](const C& c) { return std::to_string(c.dimension); }},
      {"potential.kind",
       [](C& c, const std::string& v) {
         if (v == "gaussian") c.potential = FieldSpec::Kind::gaussian;
         else if (v == "poisson") c.potential = FieldSpec::Kind::poisson;
         else throw ConfigError("potential.kind: expected gaussian or poisson");
       },
       [](const C& c) {
         return std::string(c.potential == FieldSpec::Kind::gaussian ? "gaussian" : "poisson");
       }},
      real_key("potential.amplitude", &C::amplitude),
      real_key("potential.rho", &C::rho),
      uint_key("potential.modes", &C::modes),
      {"potential.sampling",
       [](C& c, const std::string& v) {
         if (v == "spectral") c.sampling = ModeSampling::spectral;
         else if (v == "stratified_log") c.sampling = ModeSampling::stratified_log;
         else throw ConfigError("potential.sampling: expected spectral or stratified_log");
       },
       [](const C& c) {
         return std::string(c.sampling == ModeSampling::spectral ? "spectral" : "stratified_log");
       }},
      real_key("shape.radius", &C::shape_radius),
      real_key("shape.scale", &C::shape_scale),
      {"initial.kind",
       [](C& c, const std::string& v) {
         if (v == "constant") c.initial = InitialCondition::Kind::constant;
         else if (v == "gaussian_bump") c.initial = InitialCondition::Kind::gaussian_bump;
         else throw ConfigError("initial.kind: expected constant or gaussian_bump");
       },
       [](const C& c) {
         return std::string(c.initial == InitialCondition::Kind::constant ? "constant"
                                                                           : "gaussian_bump");
       }},
      real_key("initial.value", &C::initial_value),
      list_key("initial.center", &C::initial_center),
      real_key("initial.width", &C::initial_width),
      real_key("initial.height", &C::initial_height),
      real_key("t", &C::t),
      list_key("x", &C::x),
      list_key("eps_list", &C::eps_list),
      list_key("lambda_list", &C::lambda_list),
      uint_key("n_omega", &C::n_omega),
      uint_key("n_paths", &C::n_paths),
      {"dt",
       [](C& c, const std::string& v) {
         if (v == "auto") c.dt.reset();
         else c.dt = to_double("dt", v);
       },
       [](const C& c) { return c.dt ? fmt(*c.dt) : std::string("auto"); }},
      uint_key("master_seed", &C::master_seed),
      {"output", [](C& c, const std::string& v) { c.output = v; },
       [](const C& c) { return c.output; }},
      uint_key("mc.pilot_omega", &C::pilot_omega),
      uint_key("mc.pilot_paths", &C::pilot_paths),
      uint_key("mc.min_paths", &C::min_paths),
      uint_key("mc.max_paths", &C::max_paths),
      real_key("mc.inner_fraction", &C::inner_fraction),
      list_key("sample.start", &C::sample_start),
      list_key("sample.end", &C::sample_end),
      uint_key("sample.points", &C::sample_points),
      uint_key("sample.omega", &C::sample_omega),
      uint_key("validate.samples", &C::validate_samples),
      real_key("d5.lambda", &C::d5_lambda),
      real_key("d5.path_exponent", &C::d5_path_exponent),
  };
  return k;
}

inline void require(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) throw ConfigError(key + ": " + msg);
}

}  // namespace config_detail

/// Fill dimension-dependent defaults and check every constraint.
inline void finalize_config(ExperimentConfig& c) {
  using config_detail::require;
  require(c.dimension >= 3, "dimension",
          "d >= 3 is required (the effective constant integrates |xi|^-2 at the origin)");
  const std::size_t d = std::size_t(c.dimension);
  auto fill = [&](std::vector<double>& v, const std::string& key, std::vector<double> def) {
    if (v.empty()) v = std::move(def);
    require(v.size() == d, key, "needs " + std::to_string(d) + " components");
  };
  std::vector<double> e1(d, 0.0);
  e1[0] = 1.0;
  fill(c.x, "x", std::vector<double>(d, 0.0));
  fill(c.initial_center, "initial.center", std::vector<double>(d, 0.0));
  fill(c.sample_start, "sample.start", std::vector<double>(d, 0.0));
  fill(c.sample_end, "sample.end", e1);
  require(c.amplitude >= 0.0, "potential.amplitude", "must be >= 0");
  require(c.rho > 0.0, "potential.rho", "must be > 0");
  require(c.modes >= 1, "potential.modes", "must be >= 1");
  require(c.shape_radius > 0.0, "shape.radius", "must be > 0");
  require(c.potential != FieldSpec::Kind::poisson || c.shape_scale != 0.0, "shape.scale",
          "must be nonzero for a Poisson potential");
  require(c.initial_width > 0.0, "initial.width", "must be > 0");
  require(c.t > 0.0, "t", "must be > 0");
  require(!c.eps_list.empty(), "eps_list", "must not be empty");
  for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
    require(c.eps_list[i] > 0.0, "eps_list", "values must be > 0");
    require(i == 0 || c.eps_list[i] < c.eps_list[i - 1], "eps_list", "must be strictly decreasing");
  }
  for (double l : c.lambda_list) require(l > 0.0, "lambda_list", "values must be > 0");
  require(c.n_omega >= 1, "n_omega", "must be >= 1");
  require(!c.dt || *c.dt > 0.0, "dt", "must be > 0 or auto");
  require(c.pilot_omega >= 2, "mc.pilot_omega", "must be >= 2");
  require(c.pilot_paths >= 2, "mc.pilot_paths", "must be >= 2");
  require(c.min_paths >= 1 && c.min_paths <= c.max_paths, "mc.min_paths",
          "must be in [1, mc.max_paths]");
  require(c.inner_fraction > 0.0, "mc.inner_fraction", "must be > 0");
  require(c.sample_points >= 2, "sample.points", "must be >= 2");
  require(c.validate_samples >= 2, "validate.samples", "must be >= 2");
  require(c.d5_lambda > 0.0, "d5.lambda", "must be > 0");
}

/// Parse `key = value` lines; '#' starts a comment. Unknown or repeated keys are errors.
inline ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig c;
  std::map<std::string, bool> seen;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = config_detail::trim(line.substr(0, eq));
    const auto value = config_detail::trim(line.substr(eq + 1));
    const auto& ks = config_detail::keys();
    const auto it = std::find_if(ks.begin(), ks.end(), [&](const auto& k) { return k.name == key; });
    if (it == ks.end()) throw ConfigError(key + ": unknown key");
    if (seen[key]) throw ConfigError(key + ": given twice");
    seen[key] = true;
    it->set(c, value);
  }
  finalize_config(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Every key, one per line, with values that parse back to the same config.
inline std::string serialize_config(const ExperimentConfig& c) {
  std::string out;
  for (const auto& k : config_detail::keys()) out += k.name + " = " + k.get(c) + "\n";
  return out;
}

}  // namespace homfluct
