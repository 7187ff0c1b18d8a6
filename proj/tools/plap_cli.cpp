#include "plap/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

using namespace plap;

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  // flag name -> config key; filled values are applied in this order
  std::vector<std::pair<std::string, std::string>> keys{
      {"p", "p"},     {"q", "q"},         {"N", "N"},       {"n", "n_cells"},     {"s0", "s0"},
      {"ell", "ell"}, {"tol", "tol"},     {"out", "out"},   {"seed", "seed"},     {"jobs", "jobs"},
      {"kind", "kind"}, {"table", "table"}, {"rtol", "rtol"}, {"max-iter", "max_iter"}};
  std::map<std::string, std::string> values;
  bool inject_fault = false;
};

void add_flags(CLI::App* sub, Flags& flags) {
  sub->add_option("--config", flags.config, "key=value config file");
  for (const auto& [flag, key] : flags.keys) sub->add_option("--" + flag, flags.values[flag], key);
  sub->add_option("--set", flags.sets, "extra key=value override (repeatable)");
}

RunConfig build_config(const std::string& command, CLI::App* sub, const Flags& flags) {
  RunConfig cfg;
  if (!flags.config.empty()) cfg = load_config(flags.config, cfg);
  cfg.command = command;
  for (const auto& s : flags.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    set_field(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [flag, key] : flags.keys) {
    if (sub->count("--" + flag) == 0) continue;
    const std::string& v = flags.values.at(flag);
    if (flag == "q" && command == "sweep") set_field(cfg, "q_list", v);
    else set_field(cfg, key, v);
  }
  if (flags.inject_fault) cfg.inject_fault = true;
  validate(cfg);
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int cmd_solve(const RunConfig& cfg) {
  ensure_dir(cfg.out);
  const SolveOutcome o = run_solve(cfg);
  write_file_atomic(join_path(cfg.out, "result.json"), dump(solve_json(o, cfg)));
  if (o.result) {
    const auto& u = o.result->u;
    write_file_atomic(join_path(cfg.out, "profile.csv"), profile_csv(u, node_slopes(*u.grid, u.values)));
    std::string tele;
    for (const auto& r : o.telemetry)
      tele += json{{"iteration", r.iteration}, {"energy", r.energy}, {"residual", r.residual},
                   {"sigma", r.sigma}, {"polish", r.polish}}.dump() + "\n";
    write_file_atomic(join_path(cfg.out, "telemetry.jsonl"), tele);
  }
  if (o.exit_code == exit_code::validation) {
    std::cerr << "error: " << o.message << "\n";
  } else if (o.exit_code != exit_code::ok) {
    std::cerr << "solve failed: " << o.message << "\n";
  } else {
    std::printf("c = %.12g  residual = %.3e  iterations = %d  u(0) = %.10g  u(1) = %.10g\n", o.result->level,
                o.result->residual, o.result->iterations, o.result->u.values[0],
                o.result->u.values[o.result->u.values.size() - 1]);
  }
  return o.exit_code;
}

int cmd_sweep(const RunConfig& cfg) {
  ensure_dir(cfg.out);
  const SweepResult s = run_sweep(cfg);
  for (const auto& row : s.rows) {
    char name[64];
    std::snprintf(name, sizeof name, "row_q%g.json", row.q);
    write_file_atomic(join_path(cfg.out, name),
                      dump({{"q", row.q}, {"c_q", row.c_q}, {"status", row.status}, {"error", row.error}}));
  }
  write_file_atomic(join_path(cfg.out, "sweep.csv"), sweep_csv(s));
  write_file_atomic(join_path(cfg.out, "sweep.json"), dump(sweep_json(s)));
  std::cout << sweep_csv(s);
  std::printf("c_inf = %.12g\n", s.c_inf);
  for (const auto& m : s.messages) std::cerr << m << "\n";
  return s.exit_code;
}

int cmd_limit(const RunConfig& cfg) {
  ensure_dir(cfg.out);
  const LimitOutcome l = run_limit(cfg);
  write_file_atomic(join_path(cfg.out, "limit.json"), dump(limit_json(l)));
  write_file_atomic(join_path(cfg.out, "limit_profile.csv"), profile_csv(l.profile.G, l.profile.slopes));
  std::printf("G(0) = %.12g  c_inf = %.12g\n", l.profile.center, l.profile.c_inf);
  return exit_code::ok;
}

int cmd_verify(const RunConfig& cfg) {
  ensure_dir(cfg.out);
  const VerifyReport rep = run_verify(cfg);
  write_file_atomic(join_path(cfg.out, "verify.json"), dump(verify_json(rep)));
  for (const auto& r : rep.results) {
    std::string tag = r.status == "pass" ? "PASS" : r.status == "fail" ? "FAIL" : "SKIP";
    std::printf("%s %-34s %s\n", tag.c_str(), r.name.c_str(), r.detail.c_str());
  }
  if (rep.ok()) return exit_code::ok;
  std::cerr << "failing invariants:";
  for (const auto& n : rep.failing()) std::cerr << " " << n;
  std::cerr << "\n";
  return exit_code::certificate;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial Neumann p-Laplacian solver"};
  app.require_subcommand(1);
  Flags flags;
  auto* solve = app.add_subcommand("solve", "nonconstant solution for one (p, q)");
  auto* sweep = app.add_subcommand("sweep", "solutions along a q list, compared with the limit profile");
  auto* limit = app.add_subcommand("limit", "the limit profile G only");
  auto* verify = app.add_subcommand("verify", "invariant battery");
  for (auto* sub : {solve, sweep, limit, verify}) add_flags(sub, flags);
  verify->add_flag("--inject-fault", flags.inject_fault, "flip the sign of f~ before checking");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code::validation;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    const RunConfig cfg = build_config(sub->get_name(), sub, flags);
    if (sub == solve) return cmd_solve(cfg);
    if (sub == sweep) return cmd_sweep(cfg);
    if (sub == limit) return cmd_limit(cfg);
    return cmd_verify(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code::validation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code::validation;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return exit_code::solver;
  }
}
