#include "rmpc/terminal.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

namespace rmpc {

namespace {

// Solves A' X A - X = -Q via the Kronecker linear system.
Eigen::MatrixXd dlyap(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  const Eigen::Index d = A.rows();
  Eigen::MatrixXd At = A.transpose();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d * d, d * d);
  // vec(A' X A) = (A' kron A') vec(X)
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      M.block(i * d, j * d, d, d) -= At(i, j) * At;
  Eigen::Map<const Eigen::VectorXd> q(Q.data(), d * d);
  Eigen::VectorXd x = M.partialPivLu().solve(q);
  Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(x.data(), d, d);
  return 0.5 * (X + X.transpose());
}

double spectral_radius(const Eigen::MatrixXd& A) {
  return A.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<Eigen::MatrixXd> closed_loop_vertices(const UncertainSystem& sys,
                                                  const Eigen::MatrixXd& K) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& dA : sys.deltaA_vertices())
    for (const auto& dB : sys.deltaB_vertices())
      out.push_back(sys.A_bar() + dA + (sys.B_bar() + dB) * K);
  return out;
}

double max_lmi_eig(const std::vector<Eigen::MatrixXd>& Acl,
                   const Eigen::MatrixXd& P) {
  double worst = -1e300;
  for (const auto& A : Acl) {
    Eigen::MatrixXd S = A.transpose() * P * A - P;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    worst = std::max(worst, es.eigenvalues().maxCoeff());
  }
  return worst;
}

}  // namespace

std::pair<bool, Eigen::MatrixXd> check_robust_stability(
    const UncertainSystem& system, const Eigen::MatrixXd& K) {
  const int d = system.d();
  if (K.rows() != system.m() || K.cols() != d)
    throw DimensionError("check_robust_stability: K dimensions");
  const auto Acl = closed_loop_vertices(system, K);
  for (const auto& A : Acl)
    if (spectral_radius(A) >= 1.0) return {false, Eigen::MatrixXd()};

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd Anom = system.A_bar() + system.B_bar() * K;
  Eigen::MatrixXd P = dlyap(Anom, I);
  if (max_lmi_eig(Acl, P) < -1e-10) return {true, P};

  // Averaged vertex Lyapunov sweeps: blend the iterate with the Lyapunov
  // update through the currently worst vertex until the joint LMI certifies.
  for (int sweep = 0; sweep < 100; ++sweep) {
    const Eigen::MatrixXd* worst = nullptr;
    double worst_eig = -1e300;
    for (const auto& A : Acl) {
      Eigen::MatrixXd S = A.transpose() * P * A - P;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          0.5 * (S + S.transpose()));
      const double e = es.eigenvalues().maxCoeff();
      if (e > worst_eig) {
        worst_eig = e;
        worst = &A;
      }
    }
    Eigen::MatrixXd next = 0.5 * (P + I + worst->transpose() * P * *worst);
    P = 0.5 * (next + next.transpose());
    if (max_lmi_eig(Acl, P) < -1e-10) return {true, P};
  }
  return {false, Eigen::MatrixXd()};
}

HPolytope max_rpi(const UncertainSystem& system, const Eigen::MatrixXd& K,
                  int max_iter, int* iterations_out) {
  const auto Acl = closed_loop_vertices(system, K);

  // Omega_0 = {Hx x <= hx} cap {Hu K x <= hu}.
  Eigen::MatrixXd H0(system.X().num_rows() + system.U().num_rows(), system.d());
  Eigen::VectorXd h0(H0.rows());
  H0 << system.X().H(), system.U().H() * K;
  h0 << system.X().h(), system.U().h();
  HPolytope omega = HPolytope(H0, h0).remove_redundant();

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    // Pre(Omega) rows for every vertex dynamics, with the disturbance
    // support subtracted from the offsets.
    std::vector<Eigen::MatrixXd> Hs;
    std::vector<Eigen::VectorXd> hs;
    Eigen::Index total = omega.num_rows();
    for (const auto& A : Acl) {
      Eigen::MatrixXd Hp = omega.H() * A;
      Eigen::VectorXd hp(omega.num_rows());
      for (Eigen::Index i = 0; i < omega.num_rows(); ++i)
        hp(i) = omega.h()(i) - system.W().support(omega.H().row(i).transpose());
      Hs.push_back(std::move(Hp));
      hs.push_back(std::move(hp));
      total += omega.num_rows();
    }
    Eigen::MatrixXd H(total, system.d());
    Eigen::VectorXd h(total);
    H.topRows(omega.num_rows()) = omega.H();
    h.head(omega.num_rows()) = omega.h();
    Eigen::Index off = omega.num_rows();
    for (size_t k = 0; k < Hs.size(); ++k) {
      H.middleRows(off, Hs[k].rows()) = Hs[k];
      h.segment(off, hs[k].size()) = hs[k];
      off += Hs[k].rows();
    }
    HPolytope next = HPolytope(H, h).remove_redundant(1e-9);

    // next subseteq omega by construction; fixed point iff omega subseteq next.
    if (omega.subset_of(next, 1e-8)) {
      if (iterations_out) *iterations_out = iter + 1;
      return next;
    }
    omega = std::move(next);
  }
  throw NonConvergenceError("max_rpi: no fixed point within max_iter");
}

Eigen::MatrixXd terminal_cost(const UncertainSystem& system,
                              const Eigen::MatrixXd& K) {
  const Eigen::MatrixXd Acl = system.A_bar() + system.B_bar() * K;
  if (spectral_radius(Acl) >= 1.0)
    throw StabilityError("terminal_cost: nominal closed loop not Schur stable");
  const Eigen::MatrixXd Q = system.P() + K.transpose() * system.R() * K;
  return dlyap(Acl, Q);
}

TerminalIngredients build_terminal(const UncertainSystem& system,
                                   const Eigen::MatrixXd& K, int max_iter) {
  auto [stable, lyapP] = check_robust_stability(system, K);
  if (!stable)
    throw StabilityError(
        "build_terminal: K is not robustly stabilizing at the vertex pairs");
  TerminalIngredients ti;
  ti.K = K;
  ti.lyap_P = lyapP;
  ti.XN = max_rpi(system, K, max_iter, &ti.iterations);
  ti.P_N = terminal_cost(system, K);
  return ti;
}

}  // namespace rmpc
