#include "plap/io.hpp"

#include "plap/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace plap {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string to_csv(const RadialFunction<double>& u) {
  std::string out = "r,u\n";
  const auto& r = u.grid->nodes();
  for (Eigen::Index i = 0; i < r.size(); ++i) out += fmt(r[i]) + "," + fmt(u.values[i]) + "\n";
  return out;
}

std::string profile_csv(const RadialFunction<double>& u, const Vector<double>& slopes) {
  std::string out = "r,u,du\n";
  const auto& r = u.grid->nodes();
  for (Eigen::Index i = 0; i < r.size(); ++i)
    out += fmt(r[i]) + "," + fmt(u.values[i]) + "," + fmt(slopes[i]) + "\n";
  return out;
}

json to_json(const RadialFunction<double>& u) {
  return json{{"N", u.grid->dimension()},
              {"n_cells", u.grid->n_cells()},
              {"values", std::vector<double>(u.values.data(), u.values.data() + u.values.size())}};
}

RadialFunction<double> radial_function_from_json(const json& j) {
  const auto values = j.at("values").get<std::vector<double>>();
  auto grid = build_grid(j.at("N").get<int>(), j.at("n_cells").get<int>());
  return RadialFunction<double>(grid, Eigen::Map<const Vector<double>>(values.data(), Eigen::Index(values.size())));
}

TableColumns read_table_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  TableColumns cols;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double s, g, dg;
    if (!(row >> s >> g >> dg)) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError("table: malformed row '" + line + "'");
    }
    first = false;
    cols.s.push_back(s);
    cols.g.push_back(g);
    cols.dg.push_back(dg);
  }
  return cols;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace plap
