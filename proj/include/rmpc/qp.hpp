#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "rmpc/errors.hpp"

namespace rmpc {

/// Dense convex QP
///   min 1/2 z'Qz + c'z   s.t.  Aeq z = beq,  Ain z <= bin.
/// Empty blocks are allowed (zero-row matrices).
struct QPInstance {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::MatrixXd Ain;
  Eigen::VectorXd bin;
  std::vector<std::string> var_names;  // optional, diagnostics only

  Eigen::Index num_vars() const { return c.size(); }
  void validate() const;  // throws BadProblemError / DimensionError

  /// Plain-text dump (LP-style) for cross-checking with external solvers.
  std::string dump() const;
};

enum class QPStatus { Optimal, Infeasible, MaxIter, Unbounded };

struct QPResult {
  QPStatus status = QPStatus::MaxIter;
  Eigen::VectorXd z;           // primal point (best iterate on MaxIter)
  double objective = 0.0;
  Eigen::VectorXd y;           // equality duals
  Eigen::VectorXd lambda;      // inequality duals (>= 0)
  Eigen::VectorXd farkas;      // infeasibility certificate (Infeasible only)
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
};

/// Primal-dual interior point solver (Mehrotra predictor-corrector,
/// dense factorizations). One instance per thread; the workspace is
/// reused across solves. Bit-deterministic for identical inputs.
class QPSolver {
 public:
  explicit QPSolver(double tol = 1e-8, int max_iter = 100)
      : tol_(tol), max_iter_(max_iter) {}

  QPResult solve(const QPInstance& qp) const;

  /// Convenience LP front end: min c'x s.t. Aeq x = beq, Ain x <= bin.
  QPResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& Aeq,
                    const Eigen::VectorXd& beq, const Eigen::MatrixXd& Ain,
                    const Eigen::VectorXd& bin) const;

  double tol() const { return tol_; }

 private:
  QPResult run_ip(const QPInstance& qp) const;
  QPResult phase1(const QPInstance& qp) const;

  double tol_;
  int max_iter_;
};

}  // namespace rmpc
