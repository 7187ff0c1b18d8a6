#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace plap {

/// Raised for invalid user input; the CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command = "solve";
  double p = 3;
  double q = 6;
  std::vector<double> q_list;
  int N = 1;
  int n_cells = 1024;
  std::string kind = "power";  // power | table
  std::string table;           // CSV of (s, g, g') for kind = table
  std::optional<double> s0;    // empty: adaptive
  std::optional<double> ell;   // empty: midpoint of the admissible range
  double tol = 1e-9;
  int max_iter = 20000;
  double polish_threshold = 1e-3;
  double eps_reg = 1e-4;
  double eps_min = 1e-12;
  double rtol = 1e-10;
  std::string out = ".";
  std::uint64_t seed = 1;
  int jobs = 1;
  bool inject_fault = false;

  bool operator==(const RunConfig&) const = default;
};

/// Checks the invariants of a config; throws ConfigError with a short reason.
void validate(const RunConfig& cfg);

/// key=value lines, one per field, in a fixed order.
std::string serialize(const RunConfig& cfg);

/// Parses key=value text. Blank lines and lines starting with '#' are ignored;
/// unknown keys are an error. Fields not mentioned keep the values of `base`.
RunConfig parse_config(const std::string& text, RunConfig base = {});

RunConfig load_config(const std::string& path, RunConfig base = {});

/// Applies a single key=value assignment.
void set_field(RunConfig& cfg, const std::string& key, const std::string& value);

std::vector<double> parse_list(const std::string& text);

}  // namespace plap
