#include "rmpc/config.hpp"

#include <fstream>
#include <set>

#include "rmpc/errors.hpp"

namespace rmpc {

using nlohmann::json;

namespace {

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& allowed,
                  const std::set<std::string>& required) {
  if (!j.is_object())
    throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
  for (const auto& key : required)
    if (!j.count(key))
      throw ConfigError(where + ": missing key '" + key + "'");
}

std::vector<Eigen::MatrixXd> matrices_from_json(const json& j,
                                                const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ConfigError(where + ": expected a nonempty array of matrices");
  std::vector<Eigen::MatrixXd> out;
  for (const auto& mj : j) out.push_back(matrix_from_json(mj));
  return out;
}

HPolytope polytope_from_json(const json& j, const std::string& where) {
  require_keys(j, where, {"H", "h"}, {"H", "h"});
  return HPolytope(matrix_from_json(j.at("H")), vector_from_json(j.at("h")));
}

json polytope_to_json(const HPolytope& P) {
  return json{{"H", matrix_to_json(P.H())}, {"h", vector_to_json(P.h())}};
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ConfigError("matrix: expected an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols)
      throw ConfigError("matrix: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!j[r][c].is_number())
        throw ConfigError("matrix: entries must be numbers");
      M(r, c) = j[r][c].get<double>();
    }
  }
  return M;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("vector: expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("vector: entries must be numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

Config parse_config(const json& j) {
  require_keys(j, "config",
               {"system", "cost", "horizon", "gain_K", "bounds", "mpc", "sim",
                "roa"},
               {"system", "cost", "horizon", "gain_K"});

  const json& sys = j.at("system");
  require_keys(sys, "system",
               {"A_bar", "B_bar", "deltaA_vertices", "deltaB_vertices", "W",
                "X", "U"},
               {"A_bar", "B_bar", "deltaA_vertices", "deltaB_vertices", "W",
                "X", "U"});
  const json& cost = j.at("cost");
  require_keys(cost, "cost", {"P", "R"}, {"P", "R"});
  if (!j.at("horizon").is_number_integer() || j.at("horizon").get<int>() < 1)
    throw ConfigError("horizon: expected a positive integer");

  Config cfg;
  cfg.system = std::make_shared<UncertainSystem>(
      matrix_from_json(sys.at("A_bar")), matrix_from_json(sys.at("B_bar")),
      matrices_from_json(sys.at("deltaA_vertices"), "deltaA_vertices"),
      matrices_from_json(sys.at("deltaB_vertices"), "deltaB_vertices"),
      polytope_from_json(sys.at("W"), "W"),
      polytope_from_json(sys.at("X"), "X"),
      polytope_from_json(sys.at("U"), "U"), matrix_from_json(cost.at("P")),
      matrix_from_json(cost.at("R")), j.at("horizon").get<int>());
  cfg.K = matrix_from_json(j.at("gain_K"));
  if (cfg.K.rows() != cfg.system->m() || cfg.K.cols() != cfg.system->d())
    throw ConfigError("gain_K: expected an m x d matrix");

  if (j.count("bounds")) {
    const json& b = j.at("bounds");
    require_keys(b, "bounds", {"method", "N_cut", "p"}, {"method"});
    const std::string method = b.at("method").get<std::string>();
    if (method == "exact")
      cfg.bounds.method = BoundsMethod::Exact;
    else if (method == "efficient")
      cfg.bounds.method = BoundsMethod::Efficient;
    else
      throw ConfigError("bounds.method: expected 'exact' or 'efficient'");
    if (b.count("N_cut")) cfg.bounds.N_cut = b.at("N_cut").get<int>();
    if (cfg.bounds.method == BoundsMethod::Efficient && cfg.bounds.N_cut < 1)
      throw ConfigError("bounds.N_cut: required (>= 1) for method efficient");
    if (b.count("p") && b.at("p").get<std::string>() != "infinity")
      throw ConfigError("bounds.p: only 'infinity' is supported");
  }

  if (j.count("mpc")) {
    const json& m = j.at("mpc");
    require_keys(m, "mpc", {"exact_vertex_terms", "solver_tol",
                            "solver_max_iter"}, {});
    if (m.count("exact_vertex_terms"))
      cfg.mpc.exact_vertex_terms = m.at("exact_vertex_terms").get<bool>();
    if (m.count("solver_tol"))
      cfg.mpc.solver_tol = m.at("solver_tol").get<double>();
    if (m.count("solver_max_iter"))
      cfg.mpc.solver_max_iter = m.at("solver_max_iter").get<int>();
    if (cfg.mpc.solver_tol <= 0 || cfg.mpc.solver_max_iter < 1)
      throw ConfigError("mpc: solver_tol must be > 0, solver_max_iter >= 1");
  }

  if (j.count("sim")) {
    const json& s = j.at("sim");
    require_keys(s, "sim", {"T", "seeds", "w_sampler", "realization_sampler"},
                 {});
    if (s.count("T")) cfg.sim.T = s.at("T").get<int>();
    if (cfg.sim.T < 1) throw ConfigError("sim.T: expected >= 1");
    if (s.count("seeds")) {
      cfg.sim.seeds.clear();
      for (const auto& sd : s.at("seeds"))
        cfg.sim.seeds.push_back(sd.get<unsigned>());
      if (cfg.sim.seeds.empty()) throw ConfigError("sim.seeds: empty");
    }
    if (s.count("w_sampler")) {
      const std::string w = s.at("w_sampler").get<std::string>();
      if (w == "zero")
        cfg.sim.w_sampler = WSampler::Zero;
      else if (w == "uniform")
        cfg.sim.w_sampler = WSampler::Uniform;
      else if (w == "vertex")
        cfg.sim.w_sampler = WSampler::Vertex;
      else if (w == "adversarial")
        cfg.sim.w_sampler = WSampler::Adversarial;
      else
        throw ConfigError("sim.w_sampler: unknown sampler '" + w + "'");
    }
    if (s.count("realization_sampler")) {
      const std::string r = s.at("realization_sampler").get<std::string>();
      if (r == "fixed_vertex")
        cfg.sim.realization = RealizationSampler::FixedVertex;
      else if (r == "fixed_hull")
        cfg.sim.realization = RealizationSampler::FixedHull;
      else if (r == "per_step_hull")
        cfg.sim.realization = RealizationSampler::PerStepHull;
      else
        throw ConfigError("sim.realization_sampler: unknown sampler '" + r +
                          "'");
    }
  }

  if (j.count("roa")) {
    const json& r = j.at("roa");
    require_keys(r, "roa", {"n_dirs"}, {});
    if (r.count("n_dirs")) cfg.roa_n_dirs = r.at("n_dirs").get<int>();
    if (cfg.roa_n_dirs < 3) throw ConfigError("roa.n_dirs: expected >= 3");
  }
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

json example_config_json() {
  json j;
  j["system"]["A_bar"] = {{1.0, 0.15}, {0.1, 1.0}};
  j["system"]["B_bar"] = {{0.1}, {1.1}};
  j["system"]["deltaA_vertices"] = {
      {{0.0, 0.1}, {0.1, 0.0}},
      {{0.0, 0.1}, {-0.1, 0.0}},
      {{0.0, -0.1}, {0.1, 0.0}},
      {{0.0, -0.1}, {-0.1, 0.0}},
  };
  j["system"]["deltaB_vertices"] = {
      {{0.0}, {0.1}},
      {{0.0}, {-0.1}},
      {{0.1}, {0.0}},
      {{-0.1}, {0.0}},
  };
  j["system"]["W"] = polytope_to_json(HPolytope::inf_ball(2, 0.1));
  j["system"]["X"] = polytope_to_json(HPolytope::inf_ball(2, 8.0));
  j["system"]["U"] = polytope_to_json(HPolytope::inf_ball(1, 4.0));
  j["cost"]["P"] = {{10.0, 0.0}, {0.0, 10.0}};
  j["cost"]["R"] = {{2.0}};
  j["horizon"] = 3;
  j["gain_K"] = {{-0.2978, -0.3366}};
  j["bounds"] = {{"method", "exact"}, {"N_cut", 2}, {"p", "infinity"}};
  j["mpc"] = {{"exact_vertex_terms", true},
              {"solver_tol", 1e-8},
              {"solver_max_iter", 100}};
  j["sim"] = {{"T", 50},
              {"seeds", {1, 2, 3, 4, 5}},
              {"w_sampler", "uniform"},
              {"realization_sampler", "fixed_hull"}};
  j["roa"] = {{"n_dirs", 36}};
  return j;
}

Config example_config() { return parse_config(example_config_json()); }

json bounds_to_json(const std::map<int, TighteningBounds>& bounds) {
  json out;
  out["artifact"] = "tightening_bounds";
  json entries = json::array();
  for (const auto& [Nt, b] : bounds) {
    json e;
    e["Nt"] = Nt;
    e["method"] = (b.method == BoundsMethod::Exact) ? "exact" : "efficient";
    e["N_cut"] = b.N_cut;
    e["w_max"] = b.w_max;
    e["t0"] = vector_to_json(b.t0);
    e["t1"] = vector_to_json(b.t1);
    e["t2"] = vector_to_json(b.t2);
    e["t3"] = vector_to_json(b.t3);
    e["tw"] = vector_to_json(b.tw);
    e["tdA"] = vector_to_json(b.tdA);
    e["tdB"] = vector_to_json(b.tdB);
    entries.push_back(e);
  }
  out["entries"] = entries;
  return out;
}

std::map<int, TighteningBounds> bounds_from_json(const json& j) {
  require_keys(j, "bounds artifact", {"artifact", "entries"},
               {"artifact", "entries"});
  if (j.at("artifact").get<std::string>() != "tightening_bounds")
    throw ConfigError("bounds artifact: wrong artifact tag");
  std::map<int, TighteningBounds> out;
  for (const auto& e : j.at("entries")) {
    require_keys(e, "bounds entry",
                 {"Nt", "method", "N_cut", "w_max", "t0", "t1", "t2", "t3",
                  "tw", "tdA", "tdB"},
                 {"Nt", "method", "N_cut", "w_max", "t0", "t1", "t2", "t3",
                  "tw", "tdA", "tdB"});
    TighteningBounds b;
    b.Nt = e.at("Nt").get<int>();
    b.method = (e.at("method").get<std::string>() == "exact")
                   ? BoundsMethod::Exact
                   : BoundsMethod::Efficient;
    b.N_cut = e.at("N_cut").get<int>();
    b.w_max = e.at("w_max").get<double>();
    b.t0 = vector_from_json(e.at("t0"));
    b.t1 = vector_from_json(e.at("t1"));
    b.t2 = vector_from_json(e.at("t2"));
    b.t3 = vector_from_json(e.at("t3"));
    b.tw = vector_from_json(e.at("tw"));
    b.tdA = vector_from_json(e.at("tdA"));
    b.tdB = vector_from_json(e.at("tdB"));
    b.finalize();
    out.emplace(b.Nt, b);
  }
  return out;
}

json terminal_to_json(const TerminalIngredients& terminal) {
  json out;
  out["artifact"] = "terminal_ingredients";
  out["K"] = matrix_to_json(terminal.K);
  out["XN"] = polytope_to_json(terminal.XN);
  out["P_N"] = matrix_to_json(terminal.P_N);
  out["lyap_P"] = matrix_to_json(terminal.lyap_P);
  out["iterations"] = terminal.iterations;
  return out;
}

TerminalIngredients terminal_from_json(const json& j) {
  require_keys(j, "terminal artifact",
               {"artifact", "K", "XN", "P_N", "lyap_P", "iterations"},
               {"artifact", "K", "XN", "P_N", "lyap_P", "iterations"});
  if (j.at("artifact").get<std::string>() != "terminal_ingredients")
    throw ConfigError("terminal artifact: wrong artifact tag");
  TerminalIngredients t;
  t.K = matrix_from_json(j.at("K"));
  t.XN = polytope_from_json(j.at("XN"), "XN");
  t.P_N = matrix_from_json(j.at("P_N"));
  t.lyap_P = matrix_from_json(j.at("lyap_P"));
  t.iterations = j.at("iterations").get<int>();
  return t;
}

json roa_to_json(const ROAResult& result) {
  json out;
  out["artifact"] = "roa";
  json dirs = json::array(), pts = json::array(), hull = json::array();
  for (const auto& v : result.directions) dirs.push_back(vector_to_json(v));
  for (const auto& p : result.points)
    pts.push_back(p ? vector_to_json(*p) : json(nullptr));
  for (const auto& v : result.hull) hull.push_back(vector_to_json(v));
  out["directions"] = dirs;
  out["points"] = pts;
  out["hull"] = hull;
  out["volume"] = result.volume;
  return out;
}

ROAResult roa_from_json(const json& j) {
  require_keys(j, "roa artifact",
               {"artifact", "directions", "points", "hull", "volume"},
               {"artifact", "directions", "points", "hull", "volume"});
  if (j.at("artifact").get<std::string>() != "roa")
    throw ConfigError("roa artifact: wrong artifact tag");
  ROAResult r;
  for (const auto& v : j.at("directions"))
    r.directions.push_back(vector_from_json(v));
  for (const auto& p : j.at("points"))
    r.points.push_back(p.is_null()
                           ? std::optional<Eigen::VectorXd>{}
                           : std::optional<Eigen::VectorXd>(
                                 vector_from_json(p)));
  for (const auto& v : j.at("hull")) r.hull.push_back(vector_from_json(v));
  r.volume = j.at("volume").get<double>();
  return r;
}

}  // namespace rmpc
