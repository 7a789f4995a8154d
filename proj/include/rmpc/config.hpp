#pragma once

#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "rmpc/bounds.hpp"
#include "rmpc/model.hpp"
#include "rmpc/mpc.hpp"
#include "rmpc/roa.hpp"
#include "rmpc/sim.hpp"

namespace rmpc {

struct BoundsConfig {
  BoundsMethod method = BoundsMethod::Exact;
  int N_cut = 0;  // efficient method only
};

struct SimConfig {
  int T = 50;
  std::vector<unsigned> seeds = {1};
  WSampler w_sampler = WSampler::Uniform;
  RealizationSampler realization = RealizationSampler::FixedHull;
};

/// Fully parsed problem + run configuration.
struct Config {
  std::shared_ptr<UncertainSystem> system;
  Eigen::MatrixXd K;
  BoundsConfig bounds;
  MpcOptions mpc;
  SimConfig sim;
  int roa_n_dirs = 36;
};

/// Strict parse: unknown keys anywhere raise ConfigError.
Config parse_config(const nlohmann::json& j);
Config load_config(const std::string& path);

/// The bundled double-integrator-style reference problem.
nlohmann::json example_config_json();
Config example_config();

// Artifact round-trip serialization. Emission is deterministic (sorted
// keys, shortest-round-trip doubles), so emit -> load -> emit is
// byte-identical.
nlohmann::json bounds_to_json(const std::map<int, TighteningBounds>& bounds);
std::map<int, TighteningBounds> bounds_from_json(const nlohmann::json& j);

nlohmann::json terminal_to_json(const TerminalIngredients& terminal);
TerminalIngredients terminal_from_json(const nlohmann::json& j);

nlohmann::json roa_to_json(const ROAResult& result);
ROAResult roa_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

}  // namespace rmpc
