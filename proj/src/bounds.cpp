#include "rmpc/bounds.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "rmpc/parallel.hpp"

namespace rmpc {

namespace {

double induced_inf_norm(const Eigen::MatrixXd& M) {
  return M.rows() == 0 ? 0.0 : M.cwiseAbs().rowwise().sum().maxCoeff();
}

// g * (I_Nt (x) M) for a row vector g with Nt blocks of size M.rows().
Eigen::RowVectorXd row_times_kron(const Eigen::RowVectorXd& g,
                                  const Eigen::MatrixXd& M, int Nt) {
  const Eigen::Index br = M.rows(), bc = M.cols();
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(bc * Nt);
  for (int c = 0; c < Nt; ++c)
    out.segment(c * bc, bc) = g.segment(c * br, br) * M;
  return out;
}

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& M, int k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(M.rows(), M.cols());
  for (int i = 0; i < k; ++i) out = out * M;
  return out;
}

double binom(int n, int k) {
  double v = 1.0;
  for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
  return v;
}

// Max over vertex tuples (D_1, ..., D_{levels}) with D_n from terms[n-1]
// of || sum_n terms[n-1][choice_n] ||_1, by exhaustive odometer.
double max_tuple_norm(const std::vector<std::vector<Eigen::RowVectorXd>>& terms) {
  const size_t levels = terms.size();
  if (levels == 0) return 0.0;
  std::vector<size_t> idx(levels, 0);
  double best = 0.0;
  while (true) {
    Eigen::RowVectorXd sum = terms[0][idx[0]];
    for (size_t n = 1; n < levels; ++n) sum += terms[n][idx[n]];
    best = std::max(best, sum.cwiseAbs().sum());
    size_t n = 0;
    while (n < levels) {
      if (++idx[n] < terms[n].size()) break;
      idx[n] = 0;
      ++n;
    }
    if (n == levels) break;
  }
  return best;
}

struct ScaleFactors {
  double dA_norm, dB_norm, Bbar_norm;
};

ScaleFactors scale_factors(const UncertainSystem& sys) {
  ScaleFactors f{0.0, 0.0, induced_inf_norm(sys.B_bar())};
  for (const auto& V : sys.deltaA_vertices())
    f.dA_norm = std::max(f.dA_norm, induced_inf_norm(V));
  for (const auto& V : sys.deltaB_vertices())
    f.dB_norm = std::max(f.dB_norm, induced_inf_norm(V));
  return f;
}

// Core enumeration shared by exact and efficient paths: computes the
// vertex-tuple part of (t0, tw) for one row, over levels 1..max_level.
void row_tuple_bounds(const UncertainSystem& sys, const HorizonStacks& st,
                      Eigen::Index row, int max_level, double& t0_out,
                      double& tw_out) {
  const int Nt = st.Nt;
  std::vector<std::vector<Eigen::RowVectorXd>> shifted, plain;
  for (int n = 1; n <= max_level; ++n) {
    const Eigen::RowVectorXd g = st.Fx.row(row) * st.Av_blocks[n - 1];
    const Eigen::MatrixXd Abar_n = matrix_power(sys.A_bar(), n);
    const auto& verts = sys.closed_vertex_products(n);
    std::vector<Eigen::RowVectorXd> sh, pl;
    sh.reserve(verts.size());
    pl.reserve(verts.size());
    for (const auto& V : verts) {
      sh.push_back(row_times_kron(g, V - Abar_n, Nt));
      pl.push_back(row_times_kron(g, V, Nt));
    }
    shifted.push_back(std::move(sh));
    plain.push_back(std::move(pl));
  }
  t0_out = max_tuple_norm(shifted);
  tw_out = max_tuple_norm(plain);
}

}  // namespace

void TighteningBounds::finalize() {
  td1 = tdA + t1;
  td2 = tdB + t2;
  td3 = tdB + t2 + t3;
  for (const auto* v : {&t0, &t1, &t2, &t3, &tw, &tdA, &tdB}) {
    if (v->size() > 0 && v->minCoeff() < -1e-12)
      throw InvariantViolation("TighteningBounds: negative bound entry");
  }
}

double disturbance_w_max(const UncertainSystem& system) {
  double wm = 0.0;
  const int d = system.d();
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    e(i) = 1.0;
    wm = std::max(wm, system.W().support(e));
    wm = std::max(wm, system.W().support(-e));
  }
  return wm;
}

void bounds_delta(const UncertainSystem& system, const HorizonStacks& st,
                  Eigen::VectorXd& tdA, Eigen::VectorXd& tdB) {
  const Eigen::Index rows = st.Fx.rows();
  tdA.setZero(rows);
  tdB.setZero(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::RowVectorXd g = st.Fx.row(i) * st.A1_bar;
    for (const auto& V : system.deltaA_vertices())
      tdA(i) = std::max(tdA(i), row_times_kron(g, V, st.Nt).cwiseAbs().sum());
    for (const auto& V : system.deltaB_vertices())
      tdB(i) = std::max(tdB(i), row_times_kron(g, V, st.Nt).cwiseAbs().sum());
  }
}

TighteningBounds bounds_exact(const UncertainSystem& system,
                              const HorizonStacks& st, int workers) {
  if (st.Nt < 2) throw RangeError("bounds_exact: Nt must be >= 2");
  const Eigen::Index rows = st.Fx.rows();
  TighteningBounds b;
  b.Nt = st.Nt;
  b.method = BoundsMethod::Exact;
  b.t0.setZero(rows);
  b.tw.setZero(rows);

  parallel_for(
      static_cast<size_t>(rows),
      [&](size_t i) {
        row_tuple_bounds(system, st, static_cast<Eigen::Index>(i), st.Nt - 1,
                         b.t0(i), b.tw(i));
      },
      workers);

  const ScaleFactors f = scale_factors(system);
  b.t1 = b.t0 * f.dA_norm;
  b.t2 = b.t0 * f.dB_norm;
  b.t3 = b.t0 * f.Bbar_norm;
  bounds_delta(system, st, b.tdA, b.tdB);
  b.w_max = disturbance_w_max(system);
  b.finalize();
  return b;
}

TighteningBounds bounds_efficient(const UncertainSystem& system,
                                  const HorizonStacks& st, int N_cut,
                                  int workers) {
  if (st.Nt < 2) throw RangeError("bounds_efficient: Nt must be >= 2");
  if (N_cut < 2 || N_cut > st.Nt)
    throw RangeError("bounds_efficient: N_cut must be in [2, Nt]");
  const Eigen::Index rows = st.Fx.rows();
  const int Nt = st.Nt;
  const int d = st.d;

  TighteningBounds b;
  b.Nt = Nt;
  b.method = BoundsMethod::Efficient;
  b.N_cut = N_cut;
  b.t0.setZero(rows);
  b.tw.setZero(rows);

  const double normA = induced_inf_norm(system.A_bar());
  std::vector<double> powA_norm(Nt);  // ||Abar^j|| exact, per the tail term
  for (int j = 0; j < Nt; ++j)
    powA_norm[j] = induced_inf_norm(matrix_power(system.A_bar(), j));

  parallel_for(
      static_cast<size_t>(rows),
      [&](size_t ii) {
        const Eigen::Index i = static_cast<Eigen::Index>(ii);
        double t0_tuple = 0.0, tw_tuple = 0.0;
        row_tuple_bounds(system, st, i, N_cut - 1, t0_tuple, tw_tuple);

        double t0_tail = 0.0, tw_tail = 0.0;
        for (const auto& V : system.deltaA_vertices()) {
          const double normD = induced_inf_norm(V);
          double acc0 = 0.0;
          for (int j = N_cut + 1; j <= Nt; ++j) {
            const double coef =
                st.Fx.row(i).segment((j - 1) * d, d).cwiseAbs().sum();
            double inner = 0.0;
            for (int k = 1; k <= j - N_cut; ++k)
              for (int l = 1; l <= j - k; ++l)
                inner += binom(j - k, l) * std::pow(normA, j - k - l) *
                         std::pow(normD, l);
            acc0 += coef * inner;
          }
          t0_tail = std::max(t0_tail, acc0);

          double accw = 0.0;
          for (int j = N_cut; j <= Nt - 1; ++j) {
            const double coef =
                (st.Fx.row(i) * st.Av_blocks[j - 1]).cwiseAbs().sum();
            double inner = powA_norm[j];
            for (int k = 1; k <= j; ++k)
              inner += binom(j, k) * std::pow(normA, j - k) * std::pow(normD, k);
            accw += coef * inner;
          }
          tw_tail = std::max(tw_tail, accw);
        }
        b.t0(i) = t0_tuple + t0_tail;
        b.tw(i) = tw_tuple + tw_tail;
      },
      workers);

  const ScaleFactors f = scale_factors(system);
  b.t1 = b.t0 * f.dA_norm;
  b.t2 = b.t0 * f.dB_norm;
  b.t3 = b.t0 * f.Bbar_norm;
  bounds_delta(system, st, b.tdA, b.tdB);
  b.w_max = disturbance_w_max(system);
  b.finalize();
  return b;
}

SoundnessReport soundness_check(const TighteningBounds& bounds,
                                const UncertainSystem& system,
                                const HorizonStacks& st, int samples,
                                unsigned seed) {
  SoundnessReport rep;
  rep.samples = samples;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-3.0, 3.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int Nt = st.Nt;
  const int d = st.d;
  const int m = st.m;

  auto hull_sample = [&](const std::vector<Eigen::MatrixXd>& verts,
                         bool vertex_only) {
    if (vertex_only || verts.size() == 1) {
      return verts[rng() % verts.size()];
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(verts[0].rows(), verts[0].cols());
    double tot = 0.0;
    std::vector<double> lam(verts.size());
    for (auto& l : lam) {
      l = unit(rng);
      tot += l;
    }
    for (size_t k = 0; k < verts.size(); ++k) M += (lam[k] / tot) * verts[k];
    return M;
  };
  auto w_sample = [&](bool extreme) {
    Eigen::VectorXd dir(d);
    for (int i = 0; i < d; ++i) dir(i) = gauss(rng);
    const Eigen::VectorXd p = system.W().support_point(dir);
    if (extreme) return p;
    return Eigen::VectorXd(unit(rng) * p);
  };

  for (int s = 0; s < samples; ++s) {
    const bool extreme = (s % 4 == 0);
    TrueRealization real;
    real.deltaA_true = hull_sample(system.deltaA_vertices(), extreme);
    real.deltaB_true = hull_sample(system.deltaB_vertices(), extreme);

    Eigen::VectorXd xbar(d * Nt), u(m * Nt), du(m * Nt), w(d * Nt);
    for (Eigen::Index i = 0; i < xbar.size(); ++i) xbar(i) = sym(rng);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = sym(rng);
    for (Eigen::Index i = 0; i < du.size(); ++i) du(i) = sym(rng);
    for (int k = 0; k < Nt; ++k) w.segment(k * d, d) = w_sample(extreme);

    const Eigen::VectorXd x_true =
        uncertain_rollout(st, system, real, xbar, u, du, w);
    const Eigen::VectorXd lhs_true = st.Fx * x_true;

    const Eigen::VectorXd base =
        st.Fx * (st.Abar_stack * xbar + st.Bbar_stack * u +
                 (st.A1_bar - Eigen::MatrixXd::Identity(d * Nt, d * Nt)) *
                     st.Bbar_stack * du +
                 w);
    const double nx = xbar.lpNorm<Eigen::Infinity>();
    const double nu = u.lpNorm<Eigen::Infinity>();
    const double ndu = du.lpNorm<Eigen::Infinity>();
    const double nw = w.lpNorm<Eigen::Infinity>();
    const Eigen::MatrixXd A1dA = st.A1_bar * [&] {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d * Nt, d * Nt);
      for (int k = 0; k < Nt; ++k)
        K.block(k * d, k * d, d, d) = real.deltaA_true;
      return K;
    }();
    const Eigen::MatrixXd A1dB = st.A1_bar * [&] {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d * Nt, m * Nt);
      for (int k = 0; k < Nt; ++k)
        K.block(k * d, k * m, d, m) = real.deltaB_true;
      return K;
    }();

    for (Eigen::Index i = 0; i < st.Fx.rows(); ++i) {
      const double surrogate =
          base(i) + st.Fx.row(i) * (A1dA * xbar) + st.Fx.row(i) * (A1dB * u) +
          bounds.t1(i) * nx + bounds.t2(i) * nu + bounds.t3(i) * ndu +
          bounds.tw(i) * nw;
      const double margin = surrogate - lhs_true(i);
      if (margin < -1e-9) {
        ++rep.violations;
        rep.max_violation = std::max(rep.max_violation, -margin);
      }
      rep.max_slack = std::max(rep.max_slack, margin);
    }
  }
  return rep;
}

}  // namespace rmpc
