#include "rmpc/model.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace rmpc {

UncertainSystem::UncertainSystem(Eigen::MatrixXd A_bar, Eigen::MatrixXd B_bar,
                                 std::vector<Eigen::MatrixXd> deltaA_vertices,
                                 std::vector<Eigen::MatrixXd> deltaB_vertices,
                                 HPolytope W, HPolytope X, HPolytope U,
                                 Eigen::MatrixXd P, Eigen::MatrixXd R, int N,
                                 std::optional<HPolytope> XN)
    : A_bar_(std::move(A_bar)),
      B_bar_(std::move(B_bar)),
      dA_(std::move(deltaA_vertices)),
      dB_(std::move(deltaB_vertices)),
      W_(std::move(W)),
      X_(std::move(X)),
      U_(std::move(U)),
      XN_(std::move(XN)),
      P_(std::move(P)),
      R_(std::move(R)),
      N_(N) {
  const int dd = d();
  const int mm = m();
  if (A_bar_.cols() != dd) throw DimensionError("UncertainSystem: A_bar not square");
  if (B_bar_.rows() != dd) throw DimensionError("UncertainSystem: B_bar rows");
  if (dA_.empty() || dB_.empty())
    throw DimensionError("UncertainSystem: need at least one vertex per hull");
  for (const auto& V : dA_)
    if (V.rows() != dd || V.cols() != dd)
      throw DimensionError("UncertainSystem: deltaA vertex dimensions");
  for (const auto& V : dB_)
    if (V.rows() != dd || V.cols() != mm)
      throw DimensionError("UncertainSystem: deltaB vertex dimensions");
  if (W_.dim() != dd || X_.dim() != dd || U_.dim() != mm)
    throw DimensionError("UncertainSystem: polytope dimensions");
  if (P_.rows() != dd || P_.cols() != dd || R_.rows() != mm || R_.cols() != mm)
    throw DimensionError("UncertainSystem: cost matrix dimensions");
  if (N_ < 1) throw RangeError("UncertainSystem: horizon must be >= 1");

  // P, R positive definite (Cholesky succeeds).
  if (Eigen::LLT<Eigen::MatrixXd>(P_).info() != Eigen::Success)
    throw BadProblemError("UncertainSystem: P must be positive definite");
  if (Eigen::LLT<Eigen::MatrixXd>(R_).info() != Eigen::Success)
    throw BadProblemError("UncertainSystem: R must be positive definite");

  // W, X, U must contain the origin in their interior: h > 0 after
  // normalizing rows.
  auto check_origin = [](const HPolytope& S, const char* name) {
    for (Eigen::Index i = 0; i < S.num_rows(); ++i) {
      if (S.h()(i) / S.H().row(i).norm() <= 0.0)
        throw BadProblemError(std::string("UncertainSystem: ") + name +
                              " must contain the origin in its interior");
    }
  };
  check_origin(W_, "W");
  check_origin(X_, "X");
  check_origin(U_, "U");
}

UncertainSystem::UncertainSystem(const UncertainSystem& other)
    : A_bar_(other.A_bar_),
      B_bar_(other.B_bar_),
      dA_(other.dA_),
      dB_(other.dB_),
      W_(other.W_),
      X_(other.X_),
      U_(other.U_),
      XN_(other.XN_),
      P_(other.P_),
      R_(other.R_),
      N_(other.N_) {
  std::lock_guard<std::mutex> lock(other.memo_mutex_);
  products_ = other.products_;
}

UncertainSystem& UncertainSystem::operator=(const UncertainSystem& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(memo_mutex_, other.memo_mutex_);
  A_bar_ = other.A_bar_;
  B_bar_ = other.B_bar_;
  dA_ = other.dA_;
  dB_ = other.dB_;
  W_ = other.W_;
  X_ = other.X_;
  U_ = other.U_;
  XN_ = other.XN_;
  P_ = other.P_;
  R_ = other.R_;
  N_ = other.N_;
  products_ = other.products_;
  return *this;
}

const std::vector<Eigen::MatrixXd>& UncertainSystem::closed_vertex_products(
    int n) const {
  if (n < 1 || n > N_ - 1)
    throw RangeError("closed_vertex_products: n must be in [1, N-1]");
  std::lock_guard<std::mutex> lock(memo_mutex_);
  if (static_cast<int>(products_.size()) >= n && !products_[n - 1].empty())
    return products_[n - 1];
  if (static_cast<int>(products_.size()) < n) products_.resize(n);

  auto dedup_insert = [](std::vector<Eigen::MatrixXd>& out,
                         const Eigen::MatrixXd& M) {
    for (const auto& E : out)
      if ((E - M).cwiseAbs().maxCoeff() <= 1e-12) return;
    out.push_back(M);
  };

  for (int level = 0; level < n; ++level) {
    if (!products_[level].empty()) continue;
    std::vector<Eigen::MatrixXd> out;
    if (level == 0) {
      for (const auto& dA : dA_) dedup_insert(out, A_bar_ + dA);
    } else {
      for (const auto& Pm : products_[level - 1])
        for (const auto& dA : dA_) dedup_insert(out, (A_bar_ + dA) * Pm);
    }
    products_[level] = std::move(out);
  }
  return products_[n - 1];
}

bool hull_membership(const std::vector<Eigen::MatrixXd>& vertices,
                     const Eigen::MatrixXd& Q, double tol) {
  if (vertices.empty()) return false;
  const Eigen::Index rows = Q.rows(), cols = Q.cols();
  for (const auto& V : vertices)
    if (V.rows() != rows || V.cols() != cols)
      throw DimensionError("hull_membership: vertex dimension mismatch");
  const Eigen::Index nv = static_cast<Eigen::Index>(vertices.size());

  // Feasibility LP in lambda: sum lambda_i V_i = Q, sum lambda = 1,
  // lambda >= 0, all within tol via slack on the matrix equalities.
  Eigen::MatrixXd Aeq(rows * cols + 1, nv);
  Eigen::VectorXd beq(rows * cols + 1);
  for (Eigen::Index v = 0; v < nv; ++v) {
    Eigen::Map<const Eigen::VectorXd> vec(vertices[v].data(), rows * cols);
    Aeq.col(v).head(rows * cols) = vec;
    Aeq(rows * cols, v) = 1.0;
  }
  Eigen::Map<const Eigen::VectorXd> qvec(Q.data(), rows * cols);
  beq.head(rows * cols) = qvec;
  beq(rows * cols) = 1.0;

  Eigen::MatrixXd Ain = -Eigen::MatrixXd::Identity(nv, nv);
  Eigen::VectorXd bin = Eigen::VectorXd::Zero(nv);

  QPSolver solver(1e-9, 200);
  QPResult r = solver.solve_lp(Eigen::VectorXd::Zero(nv), Aeq, beq, Ain, bin);
  if (r.status == QPStatus::Optimal) {
    // Accept if equality residual is within tol.
    const Eigen::VectorXd lam = r.z.cwiseMax(0.0);
    double s = lam.sum();
    if (s <= 0) return false;
    Eigen::MatrixXd rec = Eigen::MatrixXd::Zero(rows, cols);
    for (Eigen::Index v = 0; v < nv; ++v) rec += (lam(v) / s) * vertices[v];
    return (rec - Q).cwiseAbs().maxCoeff() <= tol;
  }
  return false;
}

}  // namespace rmpc
