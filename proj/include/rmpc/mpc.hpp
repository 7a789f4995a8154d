#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <map>
#include <optional>
#include <vector>

#include "rmpc/bounds.hpp"
#include "rmpc/qp.hpp"
#include "rmpc/terminal.hpp"

namespace rmpc {

/// Shrinking horizon length: N - t until it saturates at 1.
int horizon_length(int t, int N);

/// Affine disturbance feedback policy from one feasible solve.
struct AffinePolicy {
  int Nt = 0;
  Eigen::MatrixXd M;     // (m Nt) x (d Nt), strictly block lower triangular
  Eigen::VectorXd ubar;  // m Nt
  Eigen::VectorXd xbar;  // (Nt + 1) d, nominal states incl. terminal
  int issued_at = 0;
};

struct StepResult {
  Eigen::VectorXd applied_u;
  std::optional<AffinePolicy> policy;  // fresh policy when feasible
  int backup_t_f = -1;                 // >= 0 when the backup path was used
  bool feasible = false;
  bool max_iter = false;  // solver stalled (treated as infeasible, logged)
  std::optional<double> objective;
  int Nt_used = 0;
  std::chrono::nanoseconds solve_time{0};
  int solver_iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

struct MpcOptions {
  bool exact_vertex_terms = true;
  /// Replace the multiplier blocks of the robust rows by their closed-form
  /// optimum (the disturbance support function). Exact; shrinks the online
  /// program considerably. Applies to the Nt >= 2 case only when W is an
  /// axis-aligned box (otherwise the multiplier form is kept).
  bool eliminate_w_duals = true;
  double solver_tol = 1e-8;
  int solver_max_iter = 100;
};

/// Variable layout of an assembled instance (offsets into z).
struct CaseLayout {
  int Nt = 0, d = 0, m = 0;
  int ox = 0, oxt = 0, ou = 0, oMp = -1, oMm = -1;
  int osx = -1, osu = -1, osM = -1, oL = -1, og = -1;
  int oT = -1, oTu = -1;  // support epigraph blocks of the dual-free form
  int nT = 0, nTu = 0;
  Eigen::Index n_vars = 0;
  Eigen::Index nF = 0;      // robust state row count (per vertex block)
  Eigen::Index aNt = 0;     // stacked disturbance facet count
  Eigen::Index oNt = 0;     // stacked input constraint row count
  std::vector<std::pair<int, int>> m_entries;  // (row, col) of free M entries

  Eigen::MatrixXd extract_M(const Eigen::VectorXd& z) const;
};

struct AssembledQP {
  QPInstance qp;
  CaseLayout layout;
};

/// Eq.-style tractable robust program for Nt >= 2 (dualized state and
/// input constraints, epigraph norms, optional exact vertex terms).
AssembledQP assemble_case1(const Eigen::VectorXd& x_t,
                           const UncertainSystem& system,
                           const HorizonStacks& stacks,
                           const TighteningBounds& bounds,
                           const Eigen::MatrixXd& P_N,
                           const MpcOptions& options);

/// Nt = 1 program: exact vertex-pair enumeration with a shared dual block
/// (or with the disturbance support folded into the right-hand sides when
/// options.eliminate_w_duals is set).
AssembledQP assemble_case2(const Eigen::VectorXd& x_t,
                           const UncertainSystem& system,
                           const HorizonStacks& stacks,
                           const Eigen::MatrixXd& P_N,
                           const MpcOptions& options = {});

/// Evaluates a stored affine policy at time t in state feedback form: the
/// disturbance proxies w_l = x_{l+1} - Abar x_l - Bbar u_l are
/// reconstructed from the recorded closed-loop history (indexed by absolute
/// time) and fed through the affine terms.
Eigen::VectorXd evaluate_policy(const AffinePolicy& policy,
                                const UncertainSystem& system,
                                const std::vector<Eigen::VectorXd>& states,
                                const std::vector<Eigen::VectorXd>& inputs,
                                const Eigen::VectorXd& x_t, int t);

/// Shrinking-horizon robust MPC controller with safe backup.
class Controller {
 public:
  Controller(const UncertainSystem& system, TerminalIngredients terminal,
             std::map<int, TighteningBounds> bounds_per_Nt,
             MpcOptions options = {});

  /// Runs one closed-loop step at time t (t must advance sequentially from
  /// 0). Throws InitializationError when the t = 0 solve is infeasible.
  StepResult step(const Eigen::VectorXd& x_t, int t);

  void reset();

  const UncertainSystem& system() const { return system_; }
  const TerminalIngredients& terminal() const { return terminal_; }
  const HorizonStacks& stacks(int Nt) const { return stacks_.at(Nt); }
  const TighteningBounds& bounds(int Nt) const { return bounds_.at(Nt); }
  const MpcOptions& options() const { return options_; }
  const std::optional<AffinePolicy>& last_policy() const { return backup_; }

 private:
  Eigen::VectorXd evaluate_backup(const Eigen::VectorXd& x_t, int t) const;

  UncertainSystem system_;
  TerminalIngredients terminal_;
  std::map<int, TighteningBounds> bounds_;
  std::map<int, HorizonStacks> stacks_;
  std::map<int, AssembledQP> skeleton_;  // per Nt, x_t-independent parts
  MpcOptions options_;
  QPSolver solver_;

  std::optional<AffinePolicy> backup_;
  std::vector<Eigen::VectorXd> state_history_;
  std::vector<Eigen::VectorXd> input_history_;
};

}  // namespace rmpc
