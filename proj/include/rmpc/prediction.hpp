#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rmpc/model.hpp"

namespace rmpc {

/// Stacked prediction and constraint matrices for one horizon length.
struct HorizonStacks {
  int Nt = 0;
  int d = 0;
  int m = 0;
  Eigen::MatrixXd Abar_stack;  // I_Nt (x) Abar
  Eigen::MatrixXd Bbar_stack;  // I_Nt (x) Bbar
  Eigen::MatrixXd A1_bar;      // lower block triangular, blocks Abar^{i-j}
  std::vector<Eigen::MatrixXd> Av_blocks;  // downward block shifts by 1..Nt-1
  Eigen::MatrixXd Fx;          // diag(I_{Nt-1} (x) Hx, HxN)
  Eigen::VectorXd fx;
  Eigen::MatrixXd Hu_stack;
  Eigen::VectorXd hu_stack;
  Eigen::MatrixXd Hw_stack;
  Eigen::VectorXd hw_stack;

  Eigen::Index num_state_rows() const { return Fx.rows(); }
};

/// Assembles the stacks for horizon length Nt (requires system.XN()).
HorizonStacks build_stacks(const UncertainSystem& system, int Nt);

/// Evaluates the stacked uncertain state evolution for a constant
/// realization: x_stack = A^x xbar + A^u u + A^{du} du + A^w w.
/// All sequences are stacked column vectors of length Nt blocks.
Eigen::VectorXd uncertain_rollout(const HorizonStacks& stacks,
                                  const UncertainSystem& system,
                                  const TrueRealization& realization,
                                  const Eigen::VectorXd& xbar,
                                  const Eigen::VectorXd& u_seq,
                                  const Eigen::VectorXd& du_seq,
                                  const Eigen::VectorXd& w_seq);

/// The uncertainty-dependent stacked matrices of the state evolution.
/// Offline/test use only; never materialized in the online path.
struct UncertainStackMatrices {
  Eigen::MatrixXd Ax, Au, Adu, Aw;
};
UncertainStackMatrices uncertain_stack_matrices(const HorizonStacks& stacks,
                                                const UncertainSystem& system,
                                                const Eigen::MatrixXd& deltaA,
                                                const Eigen::MatrixXd& deltaB);

}  // namespace rmpc
