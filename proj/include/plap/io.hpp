#pragma once

#include "plap/radial_core.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace plap {

using json = nlohmann::json;

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// Rows (r_i, u_i) with a header line.
std::string to_csv(const RadialFunction<double>& u);

/// Rows (r_i, u_i, u'_i) with a header line.
std::string profile_csv(const RadialFunction<double>& u, const Vector<double>& slopes);

/// {N, n_cells, values}
json to_json(const RadialFunction<double>& u);

RadialFunction<double> radial_function_from_json(const json& j);

struct TableColumns {
  std::vector<double> s, g, dg;
};

/// Reads a (s, g, g') CSV. A first line that does not parse as numbers is
/// treated as a header.
TableColumns read_table_csv(const std::string& path);

std::string join_path(const std::string& dir, const std::string& name);

}  // namespace plap
