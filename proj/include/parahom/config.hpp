#pragma once

// Experiment configuration.  Text form:
//
//   # comment (also ';')
//   [problem]
//   k = [1, 2]            numbers accept fractions: 1/8
//   coefficient = sep-trig
//   eps = [1/8, 1/16]     lists in brackets
//
// Keys may also be written fully qualified outside a section
// (problem.k = 2).  A document starting with '{' is read as JSON with the
// same sections and keys.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "parahom/effective.hpp"
#include "parahom/ivp.hpp"
#include "parahom/rates.hpp"

namespace parahom {

struct ExperimentConfig {
  struct Problem {
    int d = 1;
    std::vector<double> k{2.0};
    std::string coefficient = "sep-trig";
    std::vector<double> params;  // empty: family defaults
    double T = 0.25;
    bool operator==(const Problem&) const = default;
  } problem;
  struct Cell {
    int n_y = 64;
    int n_s_base = 64;
    double period_tol = 1e-10;
    double cg_tol = 1e-11;
    int max_periods = 200;
    bool operator==(const Cell&) const = default;
  } cell;
  struct Ivp {
    std::string scheme = "crank-nicolson";
    double points_per_eps = 16.0;
    double steps_per_scale = 8.0;
    bool operator==(const Ivp&) const = default;
  } ivp;
  struct Ladders {
    std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};  // decreasing
    std::vector<double> lambda{1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0,
                               2.0,      4.0,      8.0,      16.0,    32.0,    64.0};  // increasing
    bool operator==(const Ladders&) const = default;
  } ladders;
  struct Harness {
    std::optional<double> slope_tol;  // unset: 0.15, or 0.2 for k > 2
    double floor_tol = 1e-12;
    int threads = 1;
    std::uint64_t seed = kProbeSeed;
    std::string tensor_mode = "lambda";  // lambda | infinity | zero
    double lambda = 1.0;                 // cell period for `correctors` and `tensor --mode lambda`
    std::vector<double> anchor{0.5, 0.5, -1.0};  // x1, x2, t (t < 0: final time)
    double R = 0.5;
    double p = 6.0;
    int n_radii = 8;
    int order = 1;
    double sweep_high_max = -0.8;
    double sweep_low_min = 0.8;
    double lipschitz_variation = 0.25;
    double flatness_tol = 0.05;
    double alpha_floor = 0.3;
    bool operator==(const Harness&) const = default;
  } harness;
  struct Output {
    std::string directory = "out";
    std::vector<std::string> formats{"json", "csv"};
    bool plot = false;
    bool operator==(const Output&) const = default;
  } output;

  bool operator==(const ExperimentConfig&) const = default;

  // Derived views used by the commands.
  CoefficientField coefficient() const;
  Scheme scheme() const;
  ResolutionPolicy policy() const;
  GridPolicy grid_policy() const;
  SolverTolerances tolerances() const;
  RateOptions rate_options() const;
  ProfileOptions profile_options() const;
  double slope_tol_for(double k) const;
};

// Throws ParseError ("line N: ...") and ValidationError ("key: reason").
ExperimentConfig parse_config(std::string_view text);

// Sectioned text that parses back to the same config.
std::string emit_config(const ExperimentConfig& c);

// Resolved config as JSON.  Execution settings (threads, output directory)
// are left out unless asked for, so reports do not depend on them.
nlohmann::ordered_json config_to_json(const ExperimentConfig& c, bool execution = false);

std::uint64_t config_digest(const ExperimentConfig& c);

}  // namespace parahom
