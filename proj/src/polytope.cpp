#include "rmpc/polytope.hpp"

#include <algorithm>
#include <cmath>

namespace rmpc {

namespace {
const QPSolver& lp_solver() {
  static QPSolver solver(1e-9, 200);
  return solver;
}
}  // namespace

HPolytope::HPolytope(Eigen::MatrixXd H, Eigen::VectorXd h)
    : H_(std::move(H)), h_(std::move(h)) {
  if (H_.rows() != h_.size())
    throw DimensionError("HPolytope: row count of H must equal length of h");
  for (Eigen::Index i = 0; i < H_.rows(); ++i) {
    if (H_.row(i).norm() == 0.0)
      throw DimensionError("HPolytope: zero facet normal");
  }
}

HPolytope HPolytope::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const Eigen::Index d = lo.size();
  if (hi.size() != d) throw DimensionError("HPolytope::box: lo/hi mismatch");
  Eigen::MatrixXd H(2 * d, d);
  Eigen::VectorXd h(2 * d);
  H.topRows(d) = Eigen::MatrixXd::Identity(d, d);
  H.bottomRows(d) = -Eigen::MatrixXd::Identity(d, d);
  h.head(d) = hi;
  h.tail(d) = -lo;
  return HPolytope(H, h);
}

HPolytope HPolytope::inf_ball(int dim, double radius) {
  return box(Eigen::VectorXd::Constant(dim, -radius),
             Eigen::VectorXd::Constant(dim, radius));
}

bool HPolytope::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != dim())
    throw DimensionError("HPolytope::contains: dimension mismatch");
  return ((H_ * x - h_).array() <= tol).all();
}

double HPolytope::support(const Eigen::VectorXd& d) const {
  if (d.size() != dim())
    throw DimensionError("HPolytope::support: dimension mismatch");
  QPResult r = lp_solver().solve_lp(-d, Eigen::MatrixXd(0, dim()),
                                    Eigen::VectorXd(0), H_, h_);
  if (r.status == QPStatus::Infeasible)
    throw EmptySetError("HPolytope::support: empty polytope");
  if (r.status == QPStatus::Unbounded)
    throw UnboundedError("HPolytope::support: unbounded in direction");
  if (r.status != QPStatus::Optimal)
    throw UnboundedError("HPolytope::support: LP did not converge");
  return -r.objective;
}

Eigen::VectorXd HPolytope::support_point(const Eigen::VectorXd& d) const {
  if (d.size() != dim())
    throw DimensionError("HPolytope::support_point: dimension mismatch");
  QPResult r = lp_solver().solve_lp(-d, Eigen::MatrixXd(0, dim()),
                                    Eigen::VectorXd(0), H_, h_);
  if (r.status == QPStatus::Infeasible)
    throw EmptySetError("HPolytope::support_point: empty polytope");
  if (r.status != QPStatus::Optimal)
    throw UnboundedError("HPolytope::support_point: unbounded or stalled");
  return r.z;
}

HPolytope HPolytope::intersect(const HPolytope& other) const {
  if (other.dim() != dim())
    throw DimensionError("HPolytope::intersect: dimension mismatch");
  Eigen::MatrixXd H(H_.rows() + other.H_.rows(), dim());
  Eigen::VectorXd h(h_.size() + other.h_.size());
  H << H_, other.H_;
  h << h_, other.h_;
  return HPolytope(H, h).remove_redundant();
}

HPolytope HPolytope::remove_redundant(double tol) const {
  if (is_empty())
    throw EmptySetError("HPolytope::remove_redundant: empty polytope");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < H_.rows(); ++i) keep.push_back(i);

  // Row i is redundant if maximizing H_i x over the remaining rows (with
  // row i itself relaxed to h_i + 1 so the LP stays bounded) cannot exceed
  // h_i + tol.
  for (Eigen::Index i = H_.rows() - 1; i >= 0; --i) {
    Eigen::MatrixXd A(static_cast<Eigen::Index>(keep.size()), dim());
    Eigen::VectorXd b(static_cast<Eigen::Index>(keep.size()));
    for (size_t k = 0; k < keep.size(); ++k) {
      A.row(static_cast<Eigen::Index>(k)) = H_.row(keep[k]);
      b(static_cast<Eigen::Index>(k)) = h_(keep[k]) + (keep[k] == i ? 1.0 : 0.0);
    }
    QPResult r = lp_solver().solve_lp(-H_.row(i).transpose(),
                                      Eigen::MatrixXd(0, dim()),
                                      Eigen::VectorXd(0), A, b);
    if (r.status == QPStatus::Optimal && -r.objective <= h_(i) + tol) {
      keep.erase(std::find(keep.begin(), keep.end(), i));
    }
  }

  Eigen::MatrixXd H(static_cast<Eigen::Index>(keep.size()), dim());
  Eigen::VectorXd h(static_cast<Eigen::Index>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) {
    H.row(static_cast<Eigen::Index>(k)) = H_.row(keep[k]);
    h(static_cast<Eigen::Index>(k)) = h_(keep[k]);
  }
  return HPolytope(H, h);
}

bool HPolytope::is_empty(double tol) const {
  // Chebyshev-style LP: max margin r with Hx + r||H_i|| <= h.
  Eigen::MatrixXd A(H_.rows(), dim() + 1);
  A.leftCols(dim()) = H_;
  for (Eigen::Index i = 0; i < H_.rows(); ++i) A(i, dim()) = H_.row(i).norm();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim() + 1);
  c(dim()) = -1.0;
  // Cap the margin so the LP is bounded.
  Eigen::MatrixXd Ain(H_.rows() + 1, dim() + 1);
  Ain.topRows(H_.rows()) = A;
  Ain.bottomRows(1).setZero();
  Ain(H_.rows(), dim()) = 1.0;
  Eigen::VectorXd bin(H_.rows() + 1);
  bin.head(H_.rows()) = h_;
  bin(H_.rows()) = 1e6;
  QPResult r = lp_solver().solve_lp(c, Eigen::MatrixXd(0, dim() + 1),
                                    Eigen::VectorXd(0), Ain, bin);
  if (r.status != QPStatus::Optimal) return true;
  return -r.objective < -tol;  // best margin below -tol: no feasible point
}

bool HPolytope::subset_of(const HPolytope& other, double tol) const {
  if (other.dim() != dim())
    throw DimensionError("HPolytope::subset_of: dimension mismatch");
  for (Eigen::Index i = 0; i < other.H_.rows(); ++i) {
    if (support(other.H_.row(i).transpose()) > other.h_(i) + tol) return false;
  }
  return true;
}

std::vector<Eigen::VectorXd> HPolytope::vertices_2d(double tol) const {
  if (dim() != 2)
    throw DimensionError("HPolytope::vertices_2d: 2-D only");
  std::vector<Eigen::VectorXd> verts;
  for (Eigen::Index i = 0; i < H_.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < H_.rows(); ++j) {
      Eigen::Matrix2d A;
      A.row(0) = H_.row(i);
      A.row(1) = H_.row(j);
      if (std::abs(A.determinant()) < 1e-12) continue;
      Eigen::Vector2d v = A.inverse() * Eigen::Vector2d(h_(i), h_(j));
      if (!contains(v, tol * (1.0 + v.norm()))) continue;
      bool dup = false;
      for (const auto& u : verts)
        if ((u - v).norm() < 1e-8 * (1.0 + v.norm())) dup = true;
      if (!dup) verts.push_back(v);
    }
  }
  return verts;
}

Eigen::VectorXd HPolytope::chebyshev_center() const {
  Eigen::MatrixXd Ain(H_.rows() + 1, dim() + 1);
  Ain.topLeftCorner(H_.rows(), dim()) = H_;
  for (Eigen::Index i = 0; i < H_.rows(); ++i)
    Ain(i, dim()) = H_.row(i).norm();
  Ain.bottomRows(1).setZero();
  Ain(H_.rows(), dim()) = 1.0;
  Eigen::VectorXd bin(H_.rows() + 1);
  bin.head(H_.rows()) = h_;
  bin(H_.rows()) = 1e6;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim() + 1);
  c(dim()) = -1.0;
  QPResult r = lp_solver().solve_lp(c, Eigen::MatrixXd(0, dim() + 1),
                                    Eigen::VectorXd(0), Ain, bin);
  if (r.status != QPStatus::Optimal)
    throw EmptySetError("HPolytope::chebyshev_center: no feasible point");
  return r.z.head(dim());
}

}  // namespace rmpc
