#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rmpc/errors.hpp"
#include "rmpc/qp.hpp"

namespace rmpc {

/// Convex polytope in halfspace form {x : H x <= h}. Immutable after
/// construction; all queries that need optimization run their own LP.
class HPolytope {
 public:
  HPolytope() = default;
  HPolytope(Eigen::MatrixXd H, Eigen::VectorXd h);

  /// Axis-aligned box {lo <= x <= hi}.
  static HPolytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
  /// Symmetric box {|x_i| <= radius}.
  static HPolytope inf_ball(int dim, double radius);

  const Eigen::MatrixXd& H() const { return H_; }
  const Eigen::VectorXd& h() const { return h_; }
  int dim() const { return static_cast<int>(H_.cols()); }
  Eigen::Index num_rows() const { return H_.rows(); }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;

  /// max_{x in P} d'x via LP.
  double support(const Eigen::VectorXd& d) const;

  /// A maximizer of d'x over the polytope.
  Eigen::VectorXd support_point(const Eigen::VectorXd& d) const;

  HPolytope intersect(const HPolytope& other) const;

  /// Same set with every redundant facet removed (LP test per row).
  HPolytope remove_redundant(double tol = 1e-9) const;

  bool is_empty(double tol = 1e-9) const;

  /// Support-function containment: every facet of `other` is satisfied by
  /// all of *this (LP per row of other).
  bool subset_of(const HPolytope& other, double tol = 1e-8) const;

  /// Exact vertex enumeration, 2-D only (facet-pair intersection).
  std::vector<Eigen::VectorXd> vertices_2d(double tol = 1e-9) const;

  /// A deterministic interior-ish sample: Chebyshev-like center via LP.
  Eigen::VectorXd chebyshev_center() const;

 private:
  Eigen::MatrixXd H_;
  Eigen::VectorXd h_;
};

}  // namespace rmpc
