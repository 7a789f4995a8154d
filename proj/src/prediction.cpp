#include "rmpc/prediction.hpp"

#include <cmath>

namespace rmpc {

namespace {

Eigen::MatrixXd kron_identity(int n, const Eigen::MatrixXd& M) {
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(n * M.rows(), n * M.cols());
  for (int i = 0; i < n; ++i)
    out.block(i * M.rows(), i * M.cols(), M.rows(), M.cols()) = M;
  return out;
}

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& M, int k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(M.rows(), M.cols());
  for (int i = 0; i < k; ++i) out = out * M;
  return out;
}

}  // namespace

HorizonStacks build_stacks(const UncertainSystem& system, int Nt) {
  if (Nt < 1 || Nt > system.N())
    throw RangeError("build_stacks: Nt out of range");
  if (!system.XN().has_value())
    throw ConfigError("build_stacks: terminal set not set on system");

  const int d = system.d();
  const int m = system.m();
  const auto& Abar = system.A_bar();
  const auto& Bbar = system.B_bar();
  const HPolytope& XN = *system.XN();

  HorizonStacks st;
  st.Nt = Nt;
  st.d = d;
  st.m = m;
  st.Abar_stack = kron_identity(Nt, Abar);
  st.Bbar_stack = kron_identity(Nt, Bbar);

  st.A1_bar = Eigen::MatrixXd::Zero(d * Nt, d * Nt);
  for (int i = 0; i < Nt; ++i)
    for (int j = 0; j <= i; ++j)
      st.A1_bar.block(i * d, j * d, d, d) = matrix_power(Abar, i - j);

  st.Av_blocks.clear();
  for (int k = 1; k <= Nt - 1; ++k) {
    Eigen::MatrixXd Av = Eigen::MatrixXd::Zero(d * Nt, d * Nt);
    for (int i = k; i < Nt; ++i)
      Av.block(i * d, (i - k) * d, d, d) = Eigen::MatrixXd::Identity(d, d);
    st.Av_blocks.push_back(std::move(Av));
  }

  const Eigen::Index r = system.X().num_rows();
  const Eigen::Index rN = XN.num_rows();
  st.Fx = Eigen::MatrixXd::Zero(r * (Nt - 1) + rN, d * Nt);
  st.fx = Eigen::VectorXd::Zero(r * (Nt - 1) + rN);
  for (int k = 0; k < Nt - 1; ++k) {
    st.Fx.block(k * r, k * d, r, d) = system.X().H();
    st.fx.segment(k * r, r) = system.X().h();
  }
  st.Fx.block(r * (Nt - 1), (Nt - 1) * d, rN, d) = XN.H();
  st.fx.tail(rN) = XN.h();

  st.Hu_stack = kron_identity(Nt, system.U().H());
  st.hu_stack = system.U().h().replicate(Nt, 1);
  st.Hw_stack = kron_identity(Nt, system.W().H());
  st.hw_stack = system.W().h().replicate(Nt, 1);
  return st;
}

UncertainStackMatrices uncertain_stack_matrices(const HorizonStacks& st,
                                                const UncertainSystem& system,
                                                const Eigen::MatrixXd& deltaA,
                                                const Eigen::MatrixXd& deltaB) {
  const int d = st.d;
  const int m = st.m;
  const int Nt = st.Nt;
  const Eigen::MatrixXd Ad = system.A_bar() + deltaA;
  const Eigen::MatrixXd Bd = system.B_bar() + deltaB;

  UncertainStackMatrices out;
  out.Ax = Eigen::MatrixXd::Zero(d * Nt, d * Nt);
  out.Au = Eigen::MatrixXd::Zero(d * Nt, m * Nt);
  out.Adu = Eigen::MatrixXd::Zero(d * Nt, m * Nt);
  out.Aw = Eigen::MatrixXd::Zero(d * Nt, d * Nt);
  for (int i = 0; i < Nt; ++i) {
    for (int j = 0; j <= i; ++j) {
      const Eigen::MatrixXd Adp = matrix_power(Ad, i - j);
      if (i == j) {
        out.Ax.block(i * d, j * d, d, d) = Ad;
        out.Au.block(i * d, j * m, d, m) = Bd;
        out.Aw.block(i * d, j * d, d, d) = Eigen::MatrixXd::Identity(d, d);
      } else {
        out.Ax.block(i * d, j * d, d, d) = matrix_power(Ad, i - j) * deltaA;
        out.Au.block(i * d, j * m, d, m) = matrix_power(Ad, i - j) * deltaB;
        out.Adu.block(i * d, j * m, d, m) =
            matrix_power(Ad, i - j) * system.B_bar();
        out.Aw.block(i * d, j * d, d, d) = matrix_power(Ad, i - j);
      }
    }
  }
  return out;
}

Eigen::VectorXd uncertain_rollout(const HorizonStacks& st,
                                  const UncertainSystem& system,
                                  const TrueRealization& realization,
                                  const Eigen::VectorXd& xbar,
                                  const Eigen::VectorXd& u_seq,
                                  const Eigen::VectorXd& du_seq,
                                  const Eigen::VectorXd& w_seq) {
  const int d = st.d;
  const int m = st.m;
  const int Nt = st.Nt;
  if (xbar.size() != d * Nt || w_seq.size() != d * Nt ||
      u_seq.size() != m * Nt || du_seq.size() != m * Nt)
    throw DimensionError("uncertain_rollout: sequence lengths must equal Nt");
  const UncertainStackMatrices M = uncertain_stack_matrices(
      st, system, realization.deltaA_true, realization.deltaB_true);
  return M.Ax * xbar + M.Au * u_seq + M.Adu * du_seq + M.Aw * w_seq;
}

}  // namespace rmpc
