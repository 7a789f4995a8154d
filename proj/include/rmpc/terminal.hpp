#pragma once

#include <Eigen/Dense>
#include <optional>

#include "rmpc/model.hpp"

namespace rmpc {

struct TerminalIngredients {
  Eigen::MatrixXd K;       // terminal feedback gain (input, not synthesized)
  HPolytope XN;            // maximal robust positive invariant set
  Eigen::MatrixXd P_N;     // terminal cost matrix
  Eigen::MatrixXd lyap_P;  // common quadratic certificate
  int iterations = 0;      // fixed-point steps taken
};

/// Searches for a common quadratic Lyapunov certificate over all
/// closed-loop vertex pairs (A_m + B_m K). Vertex satisfaction certifies
/// the whole hull by convexity of x -> x'A'PAx in A.
std::pair<bool, Eigen::MatrixXd> check_robust_stability(
    const UncertainSystem& system, const Eigen::MatrixXd& K);

/// Fixed-point iteration for the maximal robust positive invariant set of
/// x+ = (A_m + B_m K) x + w inside {Hx x <= hx, Hu K x <= hu}. Throws
/// NonConvergenceError when max_iter is exhausted.
HPolytope max_rpi(const UncertainSystem& system, const Eigen::MatrixXd& K,
                  int max_iter, int* iterations_out = nullptr);

/// Discrete Lyapunov solve: Acl' P_N Acl - P_N = -(P + K'RK).
Eigen::MatrixXd terminal_cost(const UncertainSystem& system,
                              const Eigen::MatrixXd& K);

/// Full pipeline: stability check, X_N, P_N.
TerminalIngredients build_terminal(const UncertainSystem& system,
                                   const Eigen::MatrixXd& K,
                                   int max_iter = 100);

}  // namespace rmpc
