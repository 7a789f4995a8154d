// Command line front end: configuration ingestion, offline synthesis
// (tightening bounds, terminal ingredients), online solves, closed-loop
// simulation suites, region-of-attraction estimation, and benchmarks.
//
// Exit codes: 0 success, 2 validation error, 3 infeasible at the initial
// state, 4 invariant violation.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmpc/config.hpp"
#include "rmpc/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rmpc;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << content;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

Eigen::VectorXd parse_state(const std::string& s, int d) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
  if (static_cast<int>(vals.size()) != d)
    throw ConfigError("--state needs " + std::to_string(d) +
                      " comma-separated values");
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = vals[i];
  return x;
}

TerminalIngredients get_terminal(const Config& cfg, const fs::path& out,
                                 bool cache) {
  const fs::path f = out / "terminal.json";
  if (cache && fs::exists(f)) {
    std::ifstream is(f);
    return terminal_from_json(json::parse(is));
  }
  TerminalIngredients term = build_terminal(*cfg.system, cfg.K);
  write_file(f, dump_json(terminal_to_json(term)));
  return term;
}

std::map<int, TighteningBounds> get_bounds(const Config& cfg,
                                           const TerminalIngredients& term,
                                           const fs::path& out, bool cache,
                                           int workers) {
  const fs::path f = out / "bounds.json";
  if (cache && fs::exists(f)) {
    std::ifstream is(f);
    return bounds_from_json(json::parse(is));
  }
  UncertainSystem sys = *cfg.system;
  sys.set_XN(term.XN);
  std::map<int, TighteningBounds> bounds;
  for (int Nt = 2; Nt <= sys.N(); ++Nt) {
    const HorizonStacks stacks = build_stacks(sys, Nt);
    bounds.emplace(Nt, cfg.bounds.method == BoundsMethod::Exact
                           ? bounds_exact(sys, stacks, workers)
                           : bounds_efficient(sys, stacks,
                                              cfg.bounds.N_cut, workers));
  }
  write_file(f, dump_json(bounds_to_json(bounds)));
  return bounds;
}

Controller make_controller(const Config& cfg, const fs::path& out, bool cache,
                           int workers, TerminalIngredients* term_out = nullptr) {
  TerminalIngredients term = get_terminal(cfg, out, cache);
  if (term_out) *term_out = term;
  auto bounds = get_bounds(cfg, term, out, cache, workers);
  return Controller(*cfg.system, term, std::move(bounds), cfg.mpc);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0.0 : v[v.size() / 2];
}

int cmd_bounds(const Config& cfg, const fs::path& out, bool cache,
               int workers) {
  const auto bounds =
      get_bounds(cfg, get_terminal(cfg, out, cache), out, cache, workers);
  for (const auto& [Nt, b] : bounds)
    std::cout << "Nt=" << Nt << " rows=" << b.t0.size()
              << " w_max=" << b.w_max
              << " max t0=" << b.t0.maxCoeff()
              << " max tw=" << b.tw.maxCoeff() << "\n";
  std::cout << "wrote " << (out / "bounds.json").string() << "\n";
  return 0;
}

int cmd_terminal_set(const Config& cfg, const fs::path& out, bool cache) {
  const TerminalIngredients term = get_terminal(cfg, out, cache);
  std::cout << "converged in " << term.iterations << " iterations\n"
            << "terminal set facets: " << term.XN.H().rows() << "\n"
            << "P_N:\n" << term.P_N << "\n"
            << "wrote " << (out / "terminal.json").string() << "\n";
  return 0;
}

int cmd_solve(const Config& cfg, const fs::path& out, bool cache, int workers,
              const std::string& state) {
  Controller ctl = make_controller(cfg, out, cache, workers);
  const Eigen::VectorXd x = parse_state(state, cfg.system->d());
  const StepResult r = ctl.step(x, 0);
  json j;
  j["x_t"] = std::vector<double>(x.data(), x.data() + x.size());
  j["feasible"] = r.feasible;
  j["objective"] = r.objective ? json(*r.objective) : json(nullptr);
  j["applied_u"] = std::vector<double>(
      r.applied_u.data(), r.applied_u.data() + r.applied_u.size());
  j["Nt"] = r.Nt_used;
  j["solve_time_ms"] = r.solve_time.count() / 1e6;
  j["solver_iterations"] = r.solver_iterations;
  write_file(out / "solve.json", dump_json(j));
  std::cout << "feasible=" << r.feasible;
  if (r.objective) std::cout << " objective=" << *r.objective;
  std::cout << " u=" << r.applied_u.transpose()
            << " time_ms=" << r.solve_time.count() / 1e6 << "\n";
  return 0;
}

int cmd_simulate(const Config& cfg, const fs::path& out, bool cache,
                 int workers, const std::string& state,
                 std::optional<unsigned> seed_override) {
  TerminalIngredients term;
  Controller ctl = make_controller(cfg, out, cache, workers, &term);
  const Eigen::VectorXd x0 = parse_state(state, cfg.system->d());
  std::vector<unsigned> seeds =
      seed_override ? std::vector<unsigned>{*seed_override} : cfg.sim.seeds;

  json summary = json::array();
  for (unsigned seed : seeds) {
    const TrueRealization real = sample_realization(
        *cfg.system, cfg.sim.realization, seed, cfg.sim.T);
    ctl.reset();
    const SimTrace trace = simulate(*cfg.system, ctl, real, cfg.sim.w_sampler,
                                    x0, cfg.sim.T, seed);
    const fs::path f = out / ("trace_seed" + std::to_string(seed) + ".csv");
    write_file(f, trace_csv(trace));
    json s;
    s["seed"] = seed;
    s["realization"] = trace.realization_desc;
    s["min_margin"] = trace.min_margin();
    s["terminal_entry_t"] = trace.terminal_entry_time(term.XN);
    s["backup_steps"] = static_cast<int>(std::count(
        trace.backup_used.begin(), trace.backup_used.end(), true));
    summary.push_back(s);
    std::cout << "seed=" << seed << " min_margin=" << trace.min_margin()
              << " entry_t=" << trace.terminal_entry_time(term.XN)
              << " trace=" << f.string() << "\n";
  }
  write_file(out / "simulate.json", dump_json(summary));
  return 0;
}

int cmd_roa(const Config& cfg, const fs::path& out, bool cache, int workers) {
  const TerminalIngredients term = get_terminal(cfg, out, cache);
  const auto bounds = get_bounds(cfg, term, out, cache, workers);
  const ROAResult roa =
      approximate_roa(*cfg.system, bounds.at(cfg.system->N()), term,
                      cfg.roa_n_dirs, cfg.mpc, workers);
  write_file(out / "roa.json", dump_json(roa_to_json(roa)));
  write_file(out / "roa.csv", roa_csv(roa));
  if (cfg.system->d() == 2)
    write_file(out / "roa.svg", roa_svg(roa, *cfg.system, term));
  std::cout << "directions=" << roa.directions.size()
            << " hull_vertices=" << roa.hull.size()
            << " volume=" << roa.volume << "\n"
            << "wrote " << (out / "roa.json").string() << "\n";
  return 0;
}

int cmd_bench(const Config& cfg, const fs::path& out, bool cache,
              int workers) {
  json j;
  const TerminalIngredients term = get_terminal(cfg, out, cache);
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto bounds = get_bounds(cfg, term, out, false, workers);
    const auto t1 = std::chrono::steady_clock::now();
    j["offline_bounds_s"] =
        std::chrono::duration<double>(t1 - t0).count();
    (void)bounds;
  }
  // Online timing per horizon length against the cached skeletons at a
  // moderately stressed representative state.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cfg.system->d());
  for (int i = 0; i < x.size(); ++i) x(i) = (i % 2 == 0) ? 3.0 : -3.0;
  const auto bounds = get_bounds(cfg, term, out, true, workers);
  QPSolver solver(cfg.mpc.solver_tol, cfg.mpc.solver_max_iter);
  UncertainSystem sys = *cfg.system;
  sys.set_XN(term.XN);
  json online = json::object();
  for (int Nt = 1; Nt <= sys.N(); ++Nt) {
    const HorizonStacks stacks = build_stacks(sys, Nt);
    const AssembledQP prob =
        Nt == 1 ? assemble_case2(x, sys, stacks, term.P_N, cfg.mpc)
                : assemble_case1(x, sys, stacks, bounds.at(Nt), term.P_N,
                                 cfg.mpc);
    std::vector<double> times;
    double obj = 0.0;
    for (int rep = 0; rep < 11; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const QPResult r = solver.solve(prob.qp);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
      obj = r.objective;
    }
    online["Nt=" + std::to_string(Nt)] = {{"median_ms", median(times)},
                                          {"objective", obj}};
    std::cout << "Nt=" << Nt << " median_ms=" << median(times) << "\n";
  }
  j["online"] = online;
  write_file(out / "bench.json", dump_json(j));
  std::cout << "wrote " << (out / "bench.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust MPC synthesis and simulation tool"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "out";
  std::string state = "0,0";
  int workers = 0;
  bool cache = false;
  std::optional<unsigned> seed;

  app.add_option("--config", config_path, "JSON problem configuration")
      ->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", workers, "worker thread count (0 = hardware)");
  app.add_flag("--cache", cache, "reuse cached offline artifacts in --out");
  unsigned seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "override seed");

  auto* c_bounds = app.add_subcommand("bounds", "offline tightening bounds");
  auto* c_term = app.add_subcommand("terminal-set", "terminal ingredients");
  auto* c_solve = app.add_subcommand("solve", "one robust solve at --state");
  auto* c_sim = app.add_subcommand("simulate", "closed-loop runs");
  auto* c_roa = app.add_subcommand("roa", "region of attraction estimate");
  auto* c_bench = app.add_subcommand("bench", "offline/online timing");
  for (auto* c : {c_solve, c_sim})
    c->add_option("--state", state, "comma-separated state vector");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) seed = seed_val;

  try {
    const Config cfg = load_config(config_path);
    const fs::path out(out_dir);
    fs::create_directories(out);
    if (c_bounds->parsed()) return cmd_bounds(cfg, out, cache, workers);
    if (c_term->parsed()) return cmd_terminal_set(cfg, out, cache);
    if (c_solve->parsed())
      return cmd_solve(cfg, out, cache, workers, state);
    if (c_sim->parsed())
      return cmd_simulate(cfg, out, cache, workers, state, seed);
    if (c_roa->parsed()) return cmd_roa(cfg, out, cache, workers);
    if (c_bench->parsed()) return cmd_bench(cfg, out, cache, workers);
    return 2;
  } catch (const InitializationError& e) {
    std::cerr << "infeasible at t=0: " << e.what() << "\n";
    return 3;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
