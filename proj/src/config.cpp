#include "plap/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace plap {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": not a number: '" + text + "'");
  return v;
}

template <class Int = long long>
Int to_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  Int v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": not an integer: '" + text + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + text + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(to_double("q", item));
  }
  return out;
}

void set_field(RunConfig& cfg, const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(value);
  if (key == "command") cfg.command = v;
  else if (key == "p") cfg.p = to_double(key, v);
  else if (key == "q") cfg.q = to_double(key, v);
  else if (key == "q_list") cfg.q_list = parse_list(v);
  else if (key == "N") cfg.N = int(to_int(key, v));
  else if (key == "n_cells") cfg.n_cells = int(to_int(key, v));
  else if (key == "kind") cfg.kind = v;
  else if (key == "table") cfg.table = v;
  else if (key == "s0") cfg.s0 = v == "adaptive" ? std::nullopt : std::optional<double>(to_double(key, v));
  else if (key == "ell") cfg.ell = v == "auto" ? std::nullopt : std::optional<double>(to_double(key, v));
  else if (key == "tol") cfg.tol = to_double(key, v);
  else if (key == "max_iter") cfg.max_iter = int(to_int(key, v));
  else if (key == "polish_threshold") cfg.polish_threshold = to_double(key, v);
  else if (key == "eps_reg") cfg.eps_reg = to_double(key, v);
  else if (key == "eps_min") cfg.eps_min = to_double(key, v);
  else if (key == "rtol") cfg.rtol = to_double(key, v);
  else if (key == "out") cfg.out = v;
  else if (key == "seed") cfg.seed = to_int<std::uint64_t>(key, v);
  else if (key == "jobs") cfg.jobs = int(to_int(key, v));
  else if (key == "inject_fault") cfg.inject_fault = to_bool(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string serialize(const RunConfig& cfg) {
  std::ostringstream os;
  os << "command=" << cfg.command << '\n';
  os << "p=" << fmt(cfg.p) << '\n';
  os << "q=" << fmt(cfg.q) << '\n';
  os << "q_list=";
  for (std::size_t i = 0; i < cfg.q_list.size(); ++i) os << (i ? "," : "") << fmt(cfg.q_list[i]);
  os << '\n';
  os << "N=" << cfg.N << '\n';
  os << "n_cells=" << cfg.n_cells << '\n';
  os << "kind=" << cfg.kind << '\n';
  os << "table=" << cfg.table << '\n';
  os << "s0=" << (cfg.s0 ? fmt(*cfg.s0) : "adaptive") << '\n';
  os << "ell=" << (cfg.ell ? fmt(*cfg.ell) : "auto") << '\n';
  os << "tol=" << fmt(cfg.tol) << '\n';
  os << "max_iter=" << cfg.max_iter << '\n';
  os << "polish_threshold=" << fmt(cfg.polish_threshold) << '\n';
  os << "eps_reg=" << fmt(cfg.eps_reg) << '\n';
  os << "eps_min=" << fmt(cfg.eps_min) << '\n';
  os << "rtol=" << fmt(cfg.rtol) << '\n';
  os << "out=" << cfg.out << '\n';
  os << "seed=" << cfg.seed << '\n';
  os << "jobs=" << cfg.jobs << '\n';
  os << "inject_fault=" << (cfg.inject_fault ? "true" : "false") << '\n';
  return os.str();
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    set_field(base, t.substr(0, eq), t.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void validate(const RunConfig& cfg) {
  if (!(cfg.p > 1) || !std::isfinite(cfg.p)) throw ConfigError("p must exceed 1");
  if (cfg.kind != "power" && cfg.kind != "table") throw ConfigError("kind must be 'power' or 'table'");
  if (cfg.kind == "power") {
    if (cfg.command == "sweep") {
      if (cfg.q_list.empty()) throw ConfigError("q list is empty");
      for (std::size_t i = 0; i < cfg.q_list.size(); ++i) {
        if (!(cfg.q_list[i] > cfg.p)) throw ConfigError("q must exceed p");
        if (i > 0 && !(cfg.q_list[i] > cfg.q_list[i - 1])) throw ConfigError("q list must be increasing");
      }
    } else if (!(cfg.q > cfg.p)) {
      throw ConfigError("q must exceed p");
    }
  } else if (cfg.table.empty()) {
    throw ConfigError("kind=table needs a table path");
  }
  if (cfg.N < 1) throw ConfigError("N must be >= 1");
  if (cfg.n_cells < 8) throw ConfigError("n_cells must be >= 8");
  if (cfg.s0 && !(*cfg.s0 > 0)) throw ConfigError("s0 must be positive");
  if (!(cfg.tol > 0)) throw ConfigError("tol must be positive");
  if (cfg.max_iter < 1) throw ConfigError("max_iter must be positive");
  if (!(cfg.eps_reg >= cfg.eps_min && cfg.eps_min > 0)) throw ConfigError("need eps_reg >= eps_min > 0");
  if (!(cfg.rtol > 0)) throw ConfigError("rtol must be positive");
  if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
}

}  // namespace plap
