#pragma once

#include <Eigen/Dense>
#include <mutex>
#include <optional>
#include <vector>

#include "rmpc/polytope.hpp"

namespace rmpc {

/// Uncertain linear system x+ = (Abar + dA) x + (Bbar + dB) u + w with
/// dA, dB in the convex hulls of the given vertex matrices and w in W.
class UncertainSystem {
 public:
  UncertainSystem(Eigen::MatrixXd A_bar, Eigen::MatrixXd B_bar,
                  std::vector<Eigen::MatrixXd> deltaA_vertices,
                  std::vector<Eigen::MatrixXd> deltaB_vertices, HPolytope W,
                  HPolytope X, HPolytope U, Eigen::MatrixXd P,
                  Eigen::MatrixXd R, int N,
                  std::optional<HPolytope> XN = std::nullopt);

  // copyable despite the memo mutex (the memo itself is carried over)
  UncertainSystem(const UncertainSystem& other);
  UncertainSystem& operator=(const UncertainSystem& other);

  const Eigen::MatrixXd& A_bar() const { return A_bar_; }
  const Eigen::MatrixXd& B_bar() const { return B_bar_; }
  const std::vector<Eigen::MatrixXd>& deltaA_vertices() const { return dA_; }
  const std::vector<Eigen::MatrixXd>& deltaB_vertices() const { return dB_; }
  const HPolytope& W() const { return W_; }
  const HPolytope& X() const { return X_; }
  const HPolytope& U() const { return U_; }
  const Eigen::MatrixXd& P() const { return P_; }
  const Eigen::MatrixXd& R() const { return R_; }
  int N() const { return N_; }
  int d() const { return static_cast<int>(A_bar_.rows()); }
  int m() const { return static_cast<int>(B_bar_.cols()); }
  int na() const { return static_cast<int>(dA_.size()); }
  int nb() const { return static_cast<int>(dB_.size()); }

  const std::optional<HPolytope>& XN() const { return XN_; }
  void set_XN(HPolytope xn) { XN_ = std::move(xn); }

  /// Extreme points of the set of n-fold products of matrices from
  /// {Abar + dA^(j)}. Deduplicated at 1e-12 and memoized per n.
  const std::vector<Eigen::MatrixXd>& closed_vertex_products(int n) const;

 private:
  Eigen::MatrixXd A_bar_, B_bar_;
  std::vector<Eigen::MatrixXd> dA_, dB_;
  HPolytope W_, X_, U_;
  std::optional<HPolytope> XN_;
  Eigen::MatrixXd P_, R_;
  int N_;

  mutable std::mutex memo_mutex_;
  mutable std::vector<std::vector<Eigen::MatrixXd>> products_;  // index n-1
};

/// A fixed (or per-step) realization of the true parametric uncertainty.
struct TrueRealization {
  Eigen::MatrixXd deltaA_true;
  Eigen::MatrixXd deltaB_true;
  // Optional per-time-step sequences; when nonempty they override the
  // constant matrices above for steps within range.
  std::vector<Eigen::MatrixXd> deltaA_seq;
  std::vector<Eigen::MatrixXd> deltaB_seq;

  const Eigen::MatrixXd& dA_at(int t) const {
    return (t >= 0 && t < static_cast<int>(deltaA_seq.size())) ? deltaA_seq[t]
                                                               : deltaA_true;
  }
  const Eigen::MatrixXd& dB_at(int t) const {
    return (t >= 0 && t < static_cast<int>(deltaB_seq.size())) ? deltaB_seq[t]
                                                               : deltaB_true;
  }
};

/// True iff Q is a convex combination of the vertex matrices (LP feasibility).
bool hull_membership(const std::vector<Eigen::MatrixXd>& vertices,
                     const Eigen::MatrixXd& Q, double tol = 1e-8);

}  // namespace rmpc
