#include "rmpc/mpc.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

#include "rmpc/errors.hpp"

namespace rmpc {

int horizon_length(int t, int N) {
  if (t < 0) throw RangeError("horizon_length: t must be >= 0");
  if (N < 1) throw RangeError("horizon_length: N must be >= 1");
  return (t <= N - 2) ? (N - t) : 1;
}

Eigen::MatrixXd CaseLayout::extract_M(const Eigen::VectorXd& z) const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m * Nt, d * Nt);
  for (std::size_t e = 0; e < m_entries.size(); ++e) {
    const auto [r, c] = m_entries[e];
    M(r, c) = z(oMp + static_cast<int>(e)) - z(oMm + static_cast<int>(e));
  }
  return M;
}

namespace {

// Free entries of the strictly block lower triangular policy matrix, in a
// fixed order shared by the assembler and the extractor.
std::vector<std::pair<int, int>> policy_entries(int Nt, int d, int m) {
  std::vector<std::pair<int, int>> entries;
  for (int k = 1; k < Nt; ++k)
    for (int l = 0; l < k; ++l)
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < d; ++c) entries.emplace_back(k * m + r, l * d + c);
  return entries;
}

// F_row * A1_bar * (I_Nt kron D) as a row over the stacked variable the
// kron factor multiplies (state stack for D = deltaA, input stack after
// composing with Bbar_stack is handled by the caller).
Eigen::RowVectorXd kron_row(const Eigen::RowVectorXd& pre, int Nt,
                            const Eigen::MatrixXd& D) {
  const int rows = static_cast<int>(D.rows());
  const int cols = static_cast<int>(D.cols());
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(Nt * cols);
  for (int b = 0; b < Nt; ++b)
    out.segment(b * cols, cols) = pre.segment(b * rows, rows) * D;
  return out;
}

// Detects an axis-aligned box {lo <= w <= hi}: every facet normal touches a
// single coordinate and every coordinate is bounded from both sides.
std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> as_box(
    const HPolytope& W) {
  const auto& H = W.H();
  const auto& h = W.h();
  const int dim = static_cast<int>(H.cols());
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, 1.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, -1.0);
  Eigen::VectorXd has_lo = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd has_hi = Eigen::VectorXd::Zero(dim);
  for (int r = 0; r < H.rows(); ++r) {
    int j = -1;
    for (int c = 0; c < dim; ++c) {
      if (H(r, c) == 0.0) continue;
      if (j >= 0) return std::nullopt;  // row touches two coordinates
      j = c;
    }
    if (j < 0) continue;  // vacuous row
    const double v = h(r) / H(r, j);
    if (H(r, j) > 0.0) {
      hi(j) = has_hi(j) ? std::min(hi(j), v) : v;
      has_hi(j) = 1.0;
    } else {
      lo(j) = has_lo(j) ? std::max(lo(j), v) : v;
      has_lo(j) = 1.0;
    }
  }
  if (has_lo.minCoeff() == 0.0 || has_hi.minCoeff() == 0.0)
    return std::nullopt;
  return std::make_pair(lo, hi);
}

// Dual-free variant of the Nt >= 2 program for a box disturbance set: the
// minimal multiplier contribution of each robust row is the support function
// of the stacked disturbance box in the direction of the row's disturbance
// coefficient, an affine function of M handled by a per-entry epigraph
// (T >= e*hi and T >= e*lo encode T >= max over the interval).
AssembledQP assemble_case1_support(const Eigen::VectorXd& x_t,
                                   const UncertainSystem& system,
                                   const HorizonStacks& stacks,
                                   const TighteningBounds& bounds,
                                   const Eigen::MatrixXd& P_N,
                                   const MpcOptions& options,
                                   const Eigen::VectorXd& w_lo,
                                   const Eigen::VectorXd& w_hi) {
  const int Nt = stacks.Nt;
  const int d = stacks.d;
  const int m = stacks.m;
  const int dNt = d * Nt;
  const int mNt = m * Nt;

  CaseLayout L;
  L.Nt = Nt;
  L.d = d;
  L.m = m;
  L.nF = stacks.Fx.rows();
  L.aNt = stacks.Hw_stack.rows();
  L.oNt = stacks.Hu_stack.rows();
  L.m_entries = policy_entries(Nt, d, m);
  const int nM = static_cast<int>(L.m_entries.size());
  const int nF = static_cast<int>(L.nF);
  const int oNt = static_cast<int>(L.oNt);

  // M entries grouped by the disturbance step/coordinate they act on.
  std::vector<std::vector<int>> entries_by_col(dNt);
  for (int e = 0; e < nM; ++e)
    entries_by_col[L.m_entries[e].second].push_back(e);

  // Affine coefficient of the robust state rows on the policy entries.
  const Eigen::MatrixXd G = stacks.Fx * stacks.A1_bar * stacks.Bbar_stack;

  struct Term {
    int row, col;                              // (robust row, stacked w col)
    std::vector<std::pair<int, double>> lin;   // (M entry, coefficient)
    double cst;                                // constant part of the row
  };
  std::vector<Term> Ts, Tus;                   // state / input support terms
  Eigen::VectorXd supp_const = Eigen::VectorXd::Zero(nF);
  for (int i = 0; i < nF; ++i) {
    for (int c = 0; c < dNt; ++c) {
      Term t{i, c, {}, stacks.Fx(i, c)};
      for (int e : entries_by_col[c])
        if (G(i, L.m_entries[e].first) != 0.0)
          t.lin.emplace_back(e, G(i, L.m_entries[e].first));
      if (t.lin.empty()) {
        supp_const(i) +=
            std::max(t.cst * w_hi(c % d), t.cst * w_lo(c % d));
      } else {
        Ts.push_back(std::move(t));
      }
    }
  }
  for (int r = 0; r < oNt; ++r) {
    for (int c = 0; c < dNt; ++c) {
      Term t{r, c, {}, 0.0};
      for (int e : entries_by_col[c])
        if (stacks.Hu_stack(r, L.m_entries[e].first) != 0.0)
          t.lin.emplace_back(e, stacks.Hu_stack(r, L.m_entries[e].first));
      if (!t.lin.empty()) Tus.push_back(std::move(t));
    }
  }
  L.nT = static_cast<int>(Ts.size());
  L.nTu = static_cast<int>(Tus.size());

  L.ox = 0;
  L.oxt = dNt;
  L.ou = L.oxt + d;
  L.oMp = L.ou + mNt;
  L.oMm = L.oMp + nM;
  L.osx = L.oMm + nM;
  L.osu = L.osx + 1;
  L.osM = L.osu + 1;
  L.oT = L.osM + 1;
  L.oTu = L.oT + L.nT;
  const int n = L.oTu + L.nTu;
  L.n_vars = n;

  QPInstance qp;
  qp.Q = Eigen::MatrixXd::Zero(n, n);
  qp.c = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < Nt; ++k)
    qp.Q.block(L.ox + k * d, L.ox + k * d, d, d) = system.P();
  qp.Q.block(L.oxt, L.oxt, d, d) = P_N;
  for (int k = 0; k < Nt; ++k)
    qp.Q.block(L.ou + k * m, L.ou + k * m, m, m) = system.R();

  const int n_eq = d + dNt;
  qp.Aeq = Eigen::MatrixXd::Zero(n_eq, n);
  qp.beq = Eigen::VectorXd::Zero(n_eq);
  int er = 0;
  for (int r = 0; r < d; ++r) qp.Aeq(er + r, L.ox + r) = 1.0;
  qp.beq.segment(er, d) = x_t;
  er += d;
  for (int k = 0; k < Nt; ++k) {
    const int next = (k + 1 < Nt) ? L.ox + (k + 1) * d : L.oxt;
    for (int r = 0; r < d; ++r) qp.Aeq(er + r, next + r) = 1.0;
    qp.Aeq.block(er, L.ox + k * d, d, d) -= system.A_bar();
    qp.Aeq.block(er, L.ou + k * m, d, m) -= system.B_bar();
    er += d;
  }

  // Per robust state row: indices of its support epigraph variables.
  std::vector<std::vector<int>> state_T(nF);
  for (int t = 0; t < L.nT; ++t) state_T[Ts[t].row].push_back(L.oT + t);
  std::vector<std::vector<int>> input_T(oNt);
  for (int t = 0; t < L.nTu; ++t) input_T[Tus[t].row].push_back(L.oTu + t);

  const int n_state =
      options.exact_vertex_terms ? nF * system.na() * system.nb() : nF;
  const int n_in = n_state + oNt + 2 * L.nT + 2 * L.nTu + 2 * nM + 2 * dNt +
                   2 * mNt + mNt;
  qp.Ain = Eigen::MatrixXd::Zero(n_in, n);
  qp.bin = Eigen::VectorXd::Zero(n_in);
  int ir = 0;

  const Eigen::MatrixXd FA = stacks.Fx * stacks.Abar_stack;
  const Eigen::MatrixXd FB = stacks.Fx * stacks.Bbar_stack;
  const Eigen::MatrixXd FA1 = stacks.Fx * stacks.A1_bar;
  const double wmax = bounds.w_max;

  auto state_row = [&](int i, const Eigen::RowVectorXd& dAx,
                       const Eigen::RowVectorXd& dBu, double c1, double c2) {
    qp.Ain.block(ir, L.ox, 1, dNt) = FA.row(i) + dAx;
    qp.Ain.block(ir, L.ou, 1, mNt) = FB.row(i) + dBu;
    for (int tv : state_T[i]) qp.Ain(ir, tv) = 1.0;
    qp.Ain(ir, L.osx) = c1;
    qp.Ain(ir, L.osu) = c2;
    qp.Ain(ir, L.osM) = bounds.td3(i) * wmax;
    qp.bin(ir) = stacks.fx(i) - bounds.tw(i) * wmax - supp_const(i);
    ++ir;
  };
  if (options.exact_vertex_terms) {
    for (int j = 0; j < system.na(); ++j) {
      for (int k = 0; k < system.nb(); ++k) {
        for (int i = 0; i < nF; ++i) {
          const Eigen::RowVectorXd dAx =
              kron_row(FA1.row(i), Nt, system.deltaA_vertices()[j]);
          const Eigen::RowVectorXd dBu =
              kron_row(FA1.row(i), Nt, system.deltaB_vertices()[k]);
          state_row(i, dAx, dBu, bounds.t1(i), bounds.t2(i));
        }
      }
    }
  } else {
    const Eigen::RowVectorXd zx = Eigen::RowVectorXd::Zero(dNt);
    const Eigen::RowVectorXd zu = Eigen::RowVectorXd::Zero(mNt);
    for (int i = 0; i < nF; ++i)
      state_row(i, zx, zu, bounds.td1(i), bounds.td2(i));
  }

  // input rows: Hu ubar plus the exact support of (Hu M) over the w box
  for (int r = 0; r < oNt; ++r) {
    qp.Ain.block(ir, L.ou, 1, mNt) = stacks.Hu_stack.row(r);
    for (int tv : input_T[r]) qp.Ain(ir, tv) = 1.0;
    qp.bin(ir) = stacks.hu_stack(r);
    ++ir;
  }
  // support epigraphs: T >= e(M)*hi and T >= e(M)*lo
  auto epigraph_rows = [&](const Term& t, int tv) {
    for (const double b : {w_hi(t.col % d), w_lo(t.col % d)}) {
      for (const auto& [e, coef] : t.lin) {
        qp.Ain(ir, L.oMp + e) = coef * b;
        qp.Ain(ir, L.oMm + e) = -coef * b;
      }
      qp.Ain(ir, tv) = -1.0;
      qp.bin(ir) = -t.cst * b;
      ++ir;
    }
  };
  for (int t = 0; t < L.nT; ++t) epigraph_rows(Ts[t], L.oT + t);
  for (int t = 0; t < L.nTu; ++t) epigraph_rows(Tus[t], L.oTu + t);
  // policy split nonnegativity
  for (int e = 0; e < nM; ++e) qp.Ain(ir++, L.oMp + e) = -1.0;
  for (int e = 0; e < nM; ++e) qp.Ain(ir++, L.oMm + e) = -1.0;
  // epigraphs for the infinity norms
  for (int i = 0; i < dNt; ++i) {
    qp.Ain(ir, L.ox + i) = 1.0;
    qp.Ain(ir++, L.osx) = -1.0;
    qp.Ain(ir, L.ox + i) = -1.0;
    qp.Ain(ir++, L.osx) = -1.0;
  }
  for (int i = 0; i < mNt; ++i) {
    qp.Ain(ir, L.ou + i) = 1.0;
    qp.Ain(ir++, L.osu) = -1.0;
    qp.Ain(ir, L.ou + i) = -1.0;
    qp.Ain(ir++, L.osu) = -1.0;
  }
  for (int rr = 0; rr < mNt; ++rr) {
    for (int e = 0; e < nM; ++e) {
      if (L.m_entries[e].first != rr) continue;
      qp.Ain(ir, L.oMp + e) = 1.0;
      qp.Ain(ir, L.oMm + e) = 1.0;
    }
    qp.Ain(ir++, L.osM) = -1.0;
  }
  if (ir != n_in || er != n_eq)
    throw BadProblemError("assemble_case1: row bookkeeping mismatch");

  return {std::move(qp), std::move(L)};
}

}  // namespace

AssembledQP assemble_case1(const Eigen::VectorXd& x_t,
                           const UncertainSystem& system,
                           const HorizonStacks& stacks,
                           const TighteningBounds& bounds,
                           const Eigen::MatrixXd& P_N,
                           const MpcOptions& options) {
  const int Nt = stacks.Nt;
  if (Nt < 2) throw RangeError("assemble_case1 requires Nt >= 2");
  if (bounds.Nt != Nt)
    throw DimensionError("assemble_case1: bounds horizon mismatch");
  const int d = stacks.d;
  const int m = stacks.m;
  if (x_t.size() != d) throw DimensionError("assemble_case1: x_t size");
  if (P_N.rows() != d || P_N.cols() != d)
    throw DimensionError("assemble_case1: P_N must be d x d");

  if (options.eliminate_w_duals) {
    if (const auto box = as_box(system.W()))
      return assemble_case1_support(x_t, system, stacks, bounds, P_N,
                                    options, box->first, box->second);
  }

  CaseLayout L;
  L.Nt = Nt;
  L.d = d;
  L.m = m;
  L.nF = stacks.Fx.rows();
  L.aNt = stacks.Hw_stack.rows();
  L.oNt = stacks.Hu_stack.rows();
  L.m_entries = policy_entries(Nt, d, m);
  const int nM = static_cast<int>(L.m_entries.size());
  const int nF = static_cast<int>(L.nF);
  const int aNt = static_cast<int>(L.aNt);
  const int oNt = static_cast<int>(L.oNt);
  const int dNt = d * Nt;
  const int mNt = m * Nt;

  L.ox = 0;
  L.oxt = dNt;
  L.ou = L.oxt + d;
  L.oMp = L.ou + mNt;
  L.oMm = L.oMp + nM;
  L.osx = L.oMm + nM;
  L.osu = L.osx + 1;
  L.osM = L.osu + 1;
  L.oL = L.osM + 1;
  L.og = L.oL + nF * aNt;
  const int n = L.og + aNt * oNt;
  L.n_vars = n;

  auto lam = [&](int i, int q) { return L.oL + i * aNt + q; };
  auto gam = [&](int q, int r) { return L.og + q * oNt + r; };

  QPInstance qp;
  qp.Q = Eigen::MatrixXd::Zero(n, n);
  qp.c = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < Nt; ++k)
    qp.Q.block(L.ox + k * d, L.ox + k * d, d, d) = system.P();
  if (P_N.rows() != d || P_N.cols() != d)
    throw DimensionError("assemble_case1: P_N must be d x d");
  qp.Q.block(L.oxt, L.oxt, d, d) = P_N;
  for (int k = 0; k < Nt; ++k)
    qp.Q.block(L.ou + k * m, L.ou + k * m, m, m) = system.R();

  // --- equalities ---
  const int n_eq = d + dNt + nF * dNt + oNt * dNt;
  qp.Aeq = Eigen::MatrixXd::Zero(n_eq, n);
  qp.beq = Eigen::VectorXd::Zero(n_eq);
  int er = 0;
  // initial anchoring x̄_{t|t} = x_t
  for (int r = 0; r < d; ++r) qp.Aeq(er + r, L.ox + r) = 1.0;
  qp.beq.segment(er, d) = x_t;
  er += d;
  // nominal dynamics along the horizon (last row block defines x̄ terminal)
  for (int k = 0; k < Nt; ++k) {
    const int next = (k + 1 < Nt) ? L.ox + (k + 1) * d : L.oxt;
    for (int r = 0; r < d; ++r) qp.Aeq(er + r, next + r) = 1.0;
    qp.Aeq.block(er, L.ox + k * d, d, d) -= system.A_bar();
    qp.Aeq.block(er, L.ou + k * m, d, m) -= system.B_bar();
    er += d;
  }
  // dual coupling: Lambda Hw = Fx (A1_bar Bbar_stack M + I)
  const Eigen::MatrixXd E = stacks.Fx * stacks.A1_bar * stacks.Bbar_stack;
  for (int i = 0; i < nF; ++i) {
    for (int c = 0; c < dNt; ++c) {
      const int row = er + i * dNt + c;
      for (int q = 0; q < aNt; ++q)
        if (stacks.Hw_stack(q, c) != 0.0)
          qp.Aeq(row, lam(i, q)) = stacks.Hw_stack(q, c);
      for (int e = 0; e < nM; ++e) {
        const auto [mr, mc] = L.m_entries[e];
        if (mc != c || E(i, mr) == 0.0) continue;
        qp.Aeq(row, L.oMp + e) -= E(i, mr);
        qp.Aeq(row, L.oMm + e) += E(i, mr);
      }
      qp.beq(row) = stacks.Fx(i, c);
    }
  }
  er += nF * dNt;
  // input dual coupling: (Hu M)' = Hw' gamma
  for (int r = 0; r < oNt; ++r) {
    for (int c = 0; c < dNt; ++c) {
      const int row = er + r * dNt + c;
      for (int q = 0; q < aNt; ++q)
        if (stacks.Hw_stack(q, c) != 0.0)
          qp.Aeq(row, gam(q, r)) = stacks.Hw_stack(q, c);
      for (int e = 0; e < nM; ++e) {
        const auto [mr, mc] = L.m_entries[e];
        if (mc != c || stacks.Hu_stack(r, mr) == 0.0) continue;
        qp.Aeq(row, L.oMp + e) -= stacks.Hu_stack(r, mr);
        qp.Aeq(row, L.oMm + e) += stacks.Hu_stack(r, mr);
      }
    }
  }
  er += oNt * dNt;

  // --- inequalities ---
  const int n_state =
      options.exact_vertex_terms ? nF * system.na() * system.nb() : nF;
  const int n_in = n_state + oNt + nF * aNt + aNt * oNt + 2 * nM +
                   2 * dNt + 2 * mNt + mNt;
  qp.Ain = Eigen::MatrixXd::Zero(n_in, n);
  qp.bin = Eigen::VectorXd::Zero(n_in);
  int ir = 0;

  const Eigen::MatrixXd FA = stacks.Fx * stacks.Abar_stack;
  const Eigen::MatrixXd FB = stacks.Fx * stacks.Bbar_stack;
  const Eigen::MatrixXd FA1 = stacks.Fx * stacks.A1_bar;
  const double wmax = bounds.w_max;

  auto state_row = [&](int i, const Eigen::RowVectorXd& dAx,
                       const Eigen::RowVectorXd& dBu, double c1, double c2) {
    qp.Ain.block(ir, L.ox, 1, dNt) = FA.row(i) + dAx;
    qp.Ain.block(ir, L.ou, 1, mNt) = FB.row(i) + dBu;
    for (int q = 0; q < aNt; ++q)
      qp.Ain(ir, lam(i, q)) = stacks.hw_stack(q);
    qp.Ain(ir, L.osx) = c1;
    qp.Ain(ir, L.osu) = c2;
    qp.Ain(ir, L.osM) = bounds.td3(i) * wmax;
    qp.bin(ir) = stacks.fx(i) - bounds.tw(i) * wmax;
    ++ir;
  };

  if (options.exact_vertex_terms) {
    for (int j = 0; j < system.na(); ++j) {
      for (int k = 0; k < system.nb(); ++k) {
        for (int i = 0; i < nF; ++i) {
          const Eigen::RowVectorXd dAx =
              kron_row(FA1.row(i), Nt, system.deltaA_vertices()[j]);
          const Eigen::RowVectorXd dBu =
              kron_row(FA1.row(i), Nt, system.deltaB_vertices()[k]);
          state_row(i, dAx, dBu, bounds.t1(i), bounds.t2(i));
        }
      }
    }
  } else {
    const Eigen::RowVectorXd zx = Eigen::RowVectorXd::Zero(dNt);
    const Eigen::RowVectorXd zu = Eigen::RowVectorXd::Zero(mNt);
    for (int i = 0; i < nF; ++i)
      state_row(i, zx, zu, bounds.td1(i), bounds.td2(i));
  }

  // robust input rows: gamma' hw + Hu ubar <= hu
  for (int r = 0; r < oNt; ++r) {
    for (int q = 0; q < aNt; ++q)
      qp.Ain(ir, gam(q, r)) = stacks.hw_stack(q);
    qp.Ain.block(ir, L.ou, 1, mNt) = stacks.Hu_stack.row(r);
    qp.bin(ir) = stacks.hu_stack(r);
    ++ir;
  }
  // nonnegativity of the dual blocks and the policy split
  for (int i = 0; i < nF * aNt; ++i) qp.Ain(ir++, L.oL + i) = -1.0;
  for (int i = 0; i < aNt * oNt; ++i) qp.Ain(ir++, L.og + i) = -1.0;
  for (int e = 0; e < nM; ++e) qp.Ain(ir++, L.oMp + e) = -1.0;
  for (int e = 0; e < nM; ++e) qp.Ain(ir++, L.oMm + e) = -1.0;
  // epigraphs for the infinity norms
  for (int i = 0; i < dNt; ++i) {
    qp.Ain(ir, L.ox + i) = 1.0;
    qp.Ain(ir++, L.osx) = -1.0;
    qp.Ain(ir, L.ox + i) = -1.0;
    qp.Ain(ir++, L.osx) = -1.0;
  }
  for (int i = 0; i < mNt; ++i) {
    qp.Ain(ir, L.ou + i) = 1.0;
    qp.Ain(ir++, L.osu) = -1.0;
    qp.Ain(ir, L.ou + i) = -1.0;
    qp.Ain(ir++, L.osu) = -1.0;
  }
  // induced infinity norm of M: every row abs sum below s_M
  for (int rr = 0; rr < mNt; ++rr) {
    for (int e = 0; e < nM; ++e) {
      if (L.m_entries[e].first != rr) continue;
      qp.Ain(ir, L.oMp + e) = 1.0;
      qp.Ain(ir, L.oMm + e) = 1.0;
    }
    qp.Ain(ir++, L.osM) = -1.0;
  }
  if (ir != n_in || er != n_eq)
    throw BadProblemError("assemble_case1: row bookkeeping mismatch");

  return {std::move(qp), std::move(L)};
}

AssembledQP assemble_case2(const Eigen::VectorXd& x_t,
                           const UncertainSystem& system,
                           const HorizonStacks& stacks,
                           const Eigen::MatrixXd& P_N,
                           const MpcOptions& options) {
  if (stacks.Nt != 1) throw RangeError("assemble_case2 requires Nt == 1");
  const int d = stacks.d;
  const int m = stacks.m;
  if (x_t.size() != d) throw DimensionError("assemble_case2: x_t size");
  const int rN = static_cast<int>(stacks.Fx.rows());
  const int a = static_cast<int>(stacks.Hw_stack.rows());
  const int o = static_cast<int>(stacks.Hu_stack.rows());
  // With the dual eliminated, the multiplier contribution of each robust
  // row is the (constant) support of W in the direction of the terminal
  // facet normal, folded into the right-hand side.
  const bool fold = options.eliminate_w_duals;

  CaseLayout L;
  L.Nt = 1;
  L.d = d;
  L.m = m;
  L.nF = rN;
  L.aNt = a;
  L.oNt = o;
  L.ox = 0;
  L.oxt = d;
  L.ou = 2 * d;
  L.oL = fold ? -1 : 2 * d + m;
  const int n = fold ? 2 * d + m : L.oL + rN * a;
  L.n_vars = n;
  auto lam = [&](int i, int q) { return L.oL + i * a + q; };

  QPInstance qp;
  qp.Q = Eigen::MatrixXd::Zero(n, n);
  qp.c = Eigen::VectorXd::Zero(n);
  qp.Q.block(L.ox, L.ox, d, d) = system.P();
  if (P_N.rows() != d || P_N.cols() != d)
    throw DimensionError("assemble_case2: P_N must be d x d");
  qp.Q.block(L.oxt, L.oxt, d, d) = P_N;
  qp.Q.block(L.ou, L.ou, m, m) = system.R();

  const int n_eq = d + d + (fold ? 0 : rN * d);
  qp.Aeq = Eigen::MatrixXd::Zero(n_eq, n);
  qp.beq = Eigen::VectorXd::Zero(n_eq);
  int er = 0;
  for (int r = 0; r < d; ++r) qp.Aeq(er + r, L.ox + r) = 1.0;
  qp.beq.segment(er, d) = x_t;
  er += d;
  for (int r = 0; r < d; ++r) qp.Aeq(er + r, L.oxt + r) = 1.0;
  qp.Aeq.block(er, L.ox, d, d) = -system.A_bar();
  qp.Aeq.block(er, L.ou, d, m) = -system.B_bar();
  er += d;
  if (!fold) {
    // shared dual block solves the disturbance support exactly:
    // Lambda Hw = HxN
    for (int i = 0; i < rN; ++i) {
      for (int c = 0; c < d; ++c) {
        const int row = er + i * d + c;
        for (int q = 0; q < a; ++q)
          if (stacks.Hw_stack(q, c) != 0.0)
            qp.Aeq(row, lam(i, q)) = stacks.Hw_stack(q, c);
        qp.beq(row) = stacks.Fx(i, c);
      }
    }
    er += rN * d;
  }

  Eigen::VectorXd w_supp = Eigen::VectorXd::Zero(rN);
  if (fold)
    for (int i = 0; i < rN; ++i)
      w_supp(i) = system.W().support(stacks.Fx.row(i).transpose());

  const int n_in = system.na() * system.nb() * rN + o + (fold ? 0 : rN * a);
  qp.Ain = Eigen::MatrixXd::Zero(n_in, n);
  qp.bin = Eigen::VectorXd::Zero(n_in);
  int ir = 0;
  for (int j = 0; j < system.na(); ++j) {
    for (int k = 0; k < system.nb(); ++k) {
      const Eigen::MatrixXd Aj = system.A_bar() + system.deltaA_vertices()[j];
      const Eigen::MatrixXd Bk = system.B_bar() + system.deltaB_vertices()[k];
      for (int i = 0; i < rN; ++i) {
        qp.Ain.block(ir, L.ox, 1, d) = stacks.Fx.row(i) * Aj;
        qp.Ain.block(ir, L.ou, 1, m) = stacks.Fx.row(i) * Bk;
        if (fold) {
          qp.bin(ir) = stacks.fx(i) - w_supp(i);
        } else {
          for (int q = 0; q < a; ++q)
            qp.Ain(ir, lam(i, q)) = stacks.hw_stack(q);
          qp.bin(ir) = stacks.fx(i);
        }
        ++ir;
      }
    }
  }
  // policy is open loop here (M = 0), so the input dual degenerates to the
  // plain constraint on ubar
  for (int r = 0; r < o; ++r) {
    qp.Ain.block(ir, L.ou, 1, m) = stacks.Hu_stack.row(r);
    qp.bin(ir) = stacks.hu_stack(r);
    ++ir;
  }
  if (!fold)
    for (int i = 0; i < rN * a; ++i) qp.Ain(ir++, L.oL + i) = -1.0;
  if (ir != n_in || er != n_eq)
    throw BadProblemError("assemble_case2: row bookkeeping mismatch");

  return {std::move(qp), std::move(L)};
}

Controller::Controller(const UncertainSystem& system,
                       TerminalIngredients terminal,
                       std::map<int, TighteningBounds> bounds_per_Nt,
                       MpcOptions options)
    : system_(system),
      terminal_(std::move(terminal)),
      bounds_(std::move(bounds_per_Nt)),
      options_(options),
      solver_(options.solver_tol, options.solver_max_iter) {
  system_.set_XN(terminal_.XN);
  for (int Nt = 1; Nt <= system_.N(); ++Nt) {
    stacks_.emplace(Nt, build_stacks(system_, Nt));
    if (Nt >= 2 && !bounds_.count(Nt))
      throw ConfigError("Controller: missing tightening bounds for horizon " +
                        std::to_string(Nt));
  }
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(system_.d());
  for (int Nt = 1; Nt <= system_.N(); ++Nt) {
    if (Nt == 1)
      skeleton_.emplace(
          Nt, assemble_case2(origin, system_, stacks_.at(1), terminal_.P_N,
                             options_));
    else
      skeleton_.emplace(
          Nt, assemble_case1(origin, system_, stacks_.at(Nt), bounds_.at(Nt),
                             terminal_.P_N, options_));
  }
}

void Controller::reset() {
  backup_.reset();
  state_history_.clear();
  input_history_.clear();
}

Eigen::VectorXd evaluate_policy(const AffinePolicy& pol,
                                const UncertainSystem& system,
                                const std::vector<Eigen::VectorXd>& states,
                                const std::vector<Eigen::VectorXd>& inputs,
                                const Eigen::VectorXd& x_t, int t) {
  const int k = t - pol.issued_at;
  if (k < 0 || k >= pol.Nt)
    throw InvariantViolation("stored policy horizon exhausted at t=" +
                             std::to_string(t));
  const int d = system.d();
  const int m = system.m();
  Eigen::VectorXd u = pol.ubar.segment(k * m, m);
  for (int l = 0; l < k; ++l) {
    const int tl = pol.issued_at + l;
    const Eigen::VectorXd& xl = states.at(tl);
    const Eigen::VectorXd& ul = inputs.at(tl);
    const Eigen::VectorXd xl1 = (tl + 1 == t) ? x_t : states.at(tl + 1);
    const Eigen::VectorXd wl = xl1 - system.A_bar() * xl - system.B_bar() * ul;
    u += pol.M.block(k * m, l * d, m, d) * wl;
  }
  return u;
}

Eigen::VectorXd Controller::evaluate_backup(const Eigen::VectorXd& x_t,
                                            int t) const {
  if (!backup_) throw InvariantViolation("backup requested with no policy");
  return evaluate_policy(*backup_, system_, state_history_, input_history_,
                         x_t, t);
}

StepResult Controller::step(const Eigen::VectorXd& x_t, int t) {
  if (x_t.size() != system_.d())
    throw DimensionError("Controller::step: state dimension mismatch");
  if (t != static_cast<int>(state_history_.size()))
    throw RangeError("Controller::step: time steps must advance from 0");

  const int Nt = horizon_length(t, system_.N());
  AssembledQP prob = skeleton_.at(Nt);  // copy, then pin the measured state
  prob.qp.beq.head(system_.d()) = x_t;

  const auto start = std::chrono::steady_clock::now();
  QPResult res = solver_.solve(prob.qp);
  if (res.status == QPStatus::MaxIter) {
    // Near-boundary states can leave the iteration on a degenerate face
    // where the dual residual floors just above tolerance while the primal
    // iterate is already accurate. A single relaxed retry recovers those
    // solves; a persistent stall still falls through to the backup path.
    const QPSolver relaxed(std::max(1e-6, solver_.tol()), 300);
    res = relaxed.solve(prob.qp);
  }
  const auto stop = std::chrono::steady_clock::now();

  StepResult out;
  out.Nt_used = Nt;
  out.solve_time =
      std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start);
  out.solver_iterations = res.iterations;
  out.primal_residual = res.primal_residual;
  out.dual_residual = res.dual_residual;
  out.feasible = (res.status == QPStatus::Optimal);
  out.max_iter = (res.status == QPStatus::MaxIter);

  if (out.feasible) {
    const CaseLayout& L = prob.layout;
    AffinePolicy pol;
    pol.Nt = Nt;
    pol.issued_at = t;
    pol.ubar = res.z.segment(L.ou, system_.m() * Nt);
    pol.M = (Nt >= 2) ? L.extract_M(res.z)
                      : Eigen::MatrixXd::Zero(system_.m(), system_.d());
    pol.xbar.resize((Nt + 1) * system_.d());
    pol.xbar.head(system_.d() * Nt) = res.z.segment(L.ox, system_.d() * Nt);
    pol.xbar.tail(system_.d()) = res.z.segment(L.oxt, system_.d());
    out.objective = res.objective;
    out.applied_u = pol.ubar.head(system_.m());
    out.policy = pol;
    backup_ = std::move(pol);
  } else {
    if (t == 0)
      throw InitializationError(
          out.max_iter ? "solver did not converge at the initial state"
                       : "robust program infeasible at the initial state");
    out.backup_t_f = backup_ ? backup_->issued_at : -1;
    out.applied_u = evaluate_backup(x_t, t);
  }

  state_history_.push_back(x_t);
  input_history_.push_back(out.applied_u);
  return out;
}

}  // namespace rmpc
