#pragma once

// Run configuration for the command-line front end: flat key=value files,
// per-key overrides, and a fixed-order echo embedded in every output file.

#include "qvortex/basis.hpp"
#include "qvortex/model.hpp"
#include "qvortex/quadrature.hpp"
#include "qvortex/solver.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qvortex {

inline constexpr const char *kVersion = "qvortex 1.0.0";

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// 17 significant digits: reads back to the same double.
inline std::string format_double(double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

/// Shortest text that reads back to the same double, for echoing settings.
inline std::string format_setting(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc() ? std::string(buf, ptr) : format_double(value);
}

namespace detail {

inline std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return std::string(text.substr(first, last - first + 1));
}

inline double parse_real(const std::string &key, const std::string &value) {
  char *end = nullptr;
  const double out = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(out))
    throw ConfigError("key '" + key + "': expected a real number, got '" + value + "'");
  return out;
}

template <class Int> Int parse_integer(const std::string &key, const std::string &value) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  return out;
}

} // namespace detail

struct RunConfig {
  ModelParams model;
  int basis_size = 60;
  int quad_panels = 48;
  int quad_order = 8;
  double grad_tol = 1e-8;
  int max_iter = 20000;
  int restarts = 2;
  std::uint64_t rng_seed = 0;
  std::string output_dir = ".";
  Descent descent = Descent::preconditioned;
  InitialGuess initial_guess = InitialGuess::ring_bump;
  double decay_p0_fraction = 0.75; ///< P0 / P for the boundary decay check
  int fd_points = 2000;            ///< finite-difference oracle resolution
  std::string basis_cache;         ///< optional JSON cache of (G, K, C); empty disables it

  /// Sets one key from its text form. Throws ConfigError on unknown keys or bad values.
  void set(const std::string &key, const std::string &value) {
    using detail::parse_integer;
    using detail::parse_real;
    if (key == "lambda") model.lambda = parse_real(key, value);
    else if (key == "a_pot") model.a_pot = parse_real(key, value);
    else if (key == "b") model.b = parse_real(key, value);
    else if (key == "n") model.n = parse_integer<int>(key, value);
    else if (key == "p") model.p = parse_real(key, value);
    else if (key == "basis_size") basis_size = parse_integer<int>(key, value);
    else if (key == "quad_panels") quad_panels = parse_integer<int>(key, value);
    else if (key == "quad_order") quad_order = parse_integer<int>(key, value);
    else if (key == "grad_tol") grad_tol = parse_real(key, value);
    else if (key == "max_iter") max_iter = parse_integer<int>(key, value);
    else if (key == "restarts") restarts = parse_integer<int>(key, value);
    else if (key == "rng_seed") rng_seed = parse_integer<std::uint64_t>(key, value);
    else if (key == "output_dir") output_dir = value;
    else if (key == "descent") {
      if (value == "preconditioned") descent = Descent::preconditioned;
      else if (value == "steepest") descent = Descent::steepest;
      else throw ConfigError("key 'descent': expected preconditioned or steepest, got '" + value + "'");
    } else if (key == "initial_guess") {
      if (value == "ring_bump") initial_guess = InitialGuess::ring_bump;
      else if (value == "trapezoid") initial_guess = InitialGuess::trapezoid;
      else throw ConfigError("key 'initial_guess': expected ring_bump or trapezoid, got '" + value + "'");
    } else if (key == "decay_p0_fraction") decay_p0_fraction = parse_real(key, value);
    else if (key == "fd_points") fd_points = parse_integer<int>(key, value);
    else if (key == "basis_cache") basis_cache = value;
    else throw ConfigError("unknown key '" + key + "'");
  }

  /// Applies one "key=value" override.
  void apply_override(const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
    set(detail::trim(std::string_view(assignment).substr(0, eq)),
        detail::trim(std::string_view(assignment).substr(eq + 1)));
  }

  void validate() const {
    try {
      model.validate();
    } catch (const std::invalid_argument &e) {
      throw ConfigError(e.what());
    }
    auto require = [](bool ok, const char *what) {
      if (!ok) throw ConfigError(std::string("invalid run configuration: ") + what);
    };
    require(basis_size >= 1, "basis_size >= 1 violated");
    require(quad_panels >= 1, "quad_panels >= 1 violated");
    require(quad_order >= 2, "quad_order >= 2 violated");
    require(grad_tol > 0.0, "grad_tol > 0 violated");
    require(max_iter >= 1, "max_iter >= 1 violated");
    require(restarts >= 0, "restarts >= 0 violated");
    require(decay_p0_fraction > 0.0 && decay_p0_fraction < 1.0, "0 < decay_p0_fraction < 1 violated");
    require(fd_points >= 100, "fd_points >= 100 violated");
    require(!output_dir.empty(), "output_dir must not be empty");
  }

  /// Resolved configuration in a fixed key order.
  [[nodiscard]] std::vector<std::pair<std::string, std::string>> entries() const {
    return {
        {"lambda", format_setting(model.lambda)},
        {"a_pot", format_setting(model.a_pot)},
        {"b", format_setting(model.b)},
        {"n", std::to_string(model.n)},
        {"p", format_setting(model.p)},
        {"basis_size", std::to_string(basis_size)},
        {"quad_panels", std::to_string(quad_panels)},
        {"quad_order", std::to_string(quad_order)},
        {"grad_tol", format_setting(grad_tol)},
        {"max_iter", std::to_string(max_iter)},
        {"restarts", std::to_string(restarts)},
        {"rng_seed", std::to_string(rng_seed)},
        {"output_dir", output_dir},
        {"descent", descent == Descent::steepest ? "steepest" : "preconditioned"},
        {"initial_guess", initial_guess == InitialGuess::trapezoid ? "trapezoid" : "ring_bump"},
        {"decay_p0_fraction", format_setting(decay_p0_fraction)},
        {"fd_points", std::to_string(fd_points)},
        {"basis_cache", basis_cache},
    };
  }

  [[nodiscard]] SolveConfig solve_config(double q0) const {
    SolveConfig c;
    c.q0 = q0;
    c.grad_tol = grad_tol;
    c.max_iter = max_iter;
    c.restarts = restarts;
    c.seed = rng_seed;
    c.descent = descent;
    c.initial_guess = initial_guess;
    return c;
  }

  [[nodiscard]] QuadratureGrid grid() const { return build_grid(model.p, quad_panels, quad_order); }

  [[nodiscard]] SpectralBasis basis() const {
    if (basis_cache.empty()) return build_basis(model.p, basis_size, grid());
    return load_or_build_basis(basis_cache, model.p, basis_size, grid());
  }
};

/// Parses key=value lines; '#' starts a comment, blank lines are ignored.
inline RunConfig parse_config_text(const std::string &text, RunConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string content = detail::trim(std::string_view(line).substr(0, hash));
    if (content.empty()) continue;
    try {
      base.apply_override(content);
    } catch (const ConfigError &e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config_file(const std::string &path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config_text(text.str(), std::move(base));
  } catch (const ConfigError &e) {
    throw ConfigError(path + ": " + e.what());
  }
}

} // namespace qvortex
