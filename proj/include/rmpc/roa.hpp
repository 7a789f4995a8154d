#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "rmpc/mpc.hpp"

namespace rmpc {

/// Inner approximation of the region of attraction: directional extreme
/// feasible initial states and their convex hull.
struct ROAResult {
  std::vector<Eigen::VectorXd> directions;
  std::vector<std::optional<Eigen::VectorXd>> points;  // per direction
  std::vector<Eigen::VectorXd> hull;  // counter-clockwise (2-D only)
  double volume = 0.0;                // shoelace area (2-D only)
};

/// Extreme feasible initial state along the ray of v: minimizes v'x0 with
/// x0 restricted to span(v) inside the full-horizon feasible set. Returns
/// nullopt when the solver stalls.
std::optional<Eigen::VectorXd> roa_point(const UncertainSystem& system,
                                         const TighteningBounds& bounds,
                                         const TerminalIngredients& terminal,
                                         const Eigen::VectorXd& v,
                                         const MpcOptions& options = {});

/// Directional sweep + convex hull. Directions are n_dirs equally spaced
/// unit vectors (2-D); workers parallelize the directional solves with a
/// deterministic merge by direction index.
ROAResult approximate_roa(const UncertainSystem& system,
                          const TighteningBounds& bounds,
                          const TerminalIngredients& terminal, int n_dirs,
                          const MpcOptions& options = {}, int workers = 0);

/// CSV hull vertex list (header row, one vertex per line).
std::string roa_csv(const ROAResult& result);

/// Standalone SVG: hull polygon over the state constraint and terminal set
/// outlines (2-D only).
std::string roa_svg(const ROAResult& result, const UncertainSystem& system,
                    const TerminalIngredients& terminal);

/// Monotone-chain convex hull, counter-clockwise. Throws
/// DegenerateHullError on fewer than 3 distinct points or zero area.
std::vector<Eigen::VectorXd> convex_hull_2d(
    const std::vector<Eigen::VectorXd>& points);

/// Shoelace area of a convex polygon given in order.
double polygon_area(const std::vector<Eigen::VectorXd>& hull);

}  // namespace rmpc
