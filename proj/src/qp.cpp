#include "rmpc/qp.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace rmpc {

namespace {

constexpr double kStaticReg = 1e-10;
constexpr double kDivergenceLimit = 1e12;

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

// Largest alpha in (0, 1] with x + alpha*dx >= (1 - bound)*x.
double step_to_boundary(const Eigen::VectorXd& x, const Eigen::VectorXd& dx,
                        double frac) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) alpha = std::min(alpha, -frac * x(i) / dx(i));
  }
  return alpha;
}

}  // namespace

void QPInstance::validate() const {
  const Eigen::Index n = c.size();
  if (Q.rows() != n || Q.cols() != n)
    throw DimensionError("QPInstance: Q must be n x n");
  if (Aeq.rows() != beq.size() || (Aeq.rows() > 0 && Aeq.cols() != n))
    throw DimensionError("QPInstance: Aeq/beq inconsistent");
  if (Ain.rows() != bin.size() || (Ain.rows() > 0 && Ain.cols() != n))
    throw DimensionError("QPInstance: Ain/bin inconsistent");
  const double qscale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * qscale)
    throw BadProblemError("QPInstance: Q not symmetric");
  // PSD guard via pivoted LDLT; cheap relative to a solve.
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Q);
  if (ldlt.info() == Eigen::Success && Q.rows() > 0) {
    if (ldlt.vectorD().minCoeff() < -1e-10 * qscale)
      throw BadProblemError("QPInstance: Q not positive semidefinite");
  }
}

std::string QPInstance::dump() const {
  std::ostringstream os;
  os.precision(17);
  const Eigen::Index n = num_vars();
  auto name = [&](Eigen::Index j) {
    return j < static_cast<Eigen::Index>(var_names.size())
               ? var_names[j]
               : "z" + std::to_string(j);
  };
  os << "\\ dense QP, " << n << " vars\nMinimize\n obj:";
  for (Eigen::Index j = 0; j < n; ++j)
    if (c(j) != 0.0) os << " + " << c(j) << " " << name(j);
  os << " + [";
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (Q(i, j) != 0.0) os << " + " << Q(i, j) << " " << name(i) << " * " << name(j);
  os << " ] / 2\nSubject To\n";
  for (Eigen::Index i = 0; i < Aeq.rows(); ++i) {
    os << " e" << i << ":";
    for (Eigen::Index j = 0; j < n; ++j)
      if (Aeq(i, j) != 0.0) os << " + " << Aeq(i, j) << " " << name(j);
    os << " = " << beq(i) << "\n";
  }
  for (Eigen::Index i = 0; i < Ain.rows(); ++i) {
    os << " i" << i << ":";
    for (Eigen::Index j = 0; j < n; ++j)
      if (Ain(i, j) != 0.0) os << " + " << Ain(i, j) << " " << name(j);
    os << " <= " << bin(i) << "\n";
  }
  os << "Bounds\n";
  for (Eigen::Index j = 0; j < n; ++j) os << " " << name(j) << " free\n";
  os << "End\n";
  return os.str();
}

QPResult QPSolver::run_ip(const QPInstance& qp) const {
  const Eigen::Index n = qp.num_vars();
  const Eigen::Index p = qp.Aeq.rows();
  const Eigen::Index mi = qp.Ain.rows();

  QPResult res;
  res.z = Eigen::VectorXd::Zero(n);
  res.y = Eigen::VectorXd::Zero(p);
  res.lambda = Eigen::VectorXd::Zero(mi);

  const double scale_p =
      1.0 + std::max(inf_norm(qp.beq), inf_norm(qp.bin));
  const double scale_d = 1.0 + inf_norm(qp.c);

  // Equality-only (or unconstrained) case: one KKT solve.
  if (mi == 0) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + p, n + p);
    K.topLeftCorner(n, n) = qp.Q + kStaticReg * Eigen::MatrixXd::Identity(n, n);
    if (p > 0) {
      K.topRightCorner(n, p) = qp.Aeq.transpose();
      K.bottomLeftCorner(p, n) = qp.Aeq;
      K.bottomRightCorner(p, p) = -kStaticReg * Eigen::MatrixXd::Identity(p, p);
    }
    Eigen::VectorXd rhs(n + p);
    rhs.head(n) = -qp.c;
    rhs.tail(p) = qp.beq;
    Eigen::VectorXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(K).solve(rhs);
    res.z = sol.head(n);
    res.y = sol.tail(p);
    res.objective = 0.5 * res.z.dot(qp.Q * res.z) + qp.c.dot(res.z);
    res.primal_residual = p > 0 ? inf_norm(qp.Aeq * res.z - qp.beq) : 0.0;
    res.dual_residual =
        inf_norm(qp.Q * res.z + qp.c + (p > 0 ? Eigen::VectorXd(qp.Aeq.transpose() * res.y)
                                              : Eigen::VectorXd::Zero(n)));
    res.iterations = 1;
    const bool ok = res.primal_residual <= tol_ * scale_p &&
                    res.dual_residual <= 1e2 * tol_ * scale_d;
    res.status = ok ? QPStatus::Optimal
                    : (inf_norm(res.z) > kDivergenceLimit ? QPStatus::Unbounded
                                                          : QPStatus::MaxIter);
    return res;
  }

  // Starting point: ignore inequalities for z, then positive (s, lambda).
  {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + p, n + p);
    K.topLeftCorner(n, n) =
        qp.Q + Eigen::MatrixXd::Identity(n, n);
    if (p > 0) {
      K.topRightCorner(n, p) = qp.Aeq.transpose();
      K.bottomLeftCorner(p, n) = qp.Aeq;
      K.bottomRightCorner(p, p) = -kStaticReg * Eigen::MatrixXd::Identity(p, p);
    }
    Eigen::VectorXd rhs(n + p);
    rhs.head(n) = -qp.c;
    rhs.tail(p) = qp.beq;
    Eigen::VectorXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(K).solve(rhs);
    res.z = sol.head(n);
    res.y = sol.tail(p);
  }
  Eigen::VectorXd s = (qp.bin - qp.Ain * res.z).cwiseMax(1.0);
  Eigen::VectorXd lambda = Eigen::VectorXd::Ones(mi);

  Eigen::MatrixXd K(n + p, n + p);
  Eigen::VectorXd rhs(n + p);

  for (int it = 0; it < max_iter_; ++it) {
    const Eigen::VectorXd r_d = qp.Q * res.z + qp.c +
                                (p > 0 ? Eigen::VectorXd(qp.Aeq.transpose() * res.y)
                                       : Eigen::VectorXd::Zero(n)) +
                                qp.Ain.transpose() * lambda;
    const Eigen::VectorXd r_p =
        p > 0 ? Eigen::VectorXd(qp.Aeq * res.z - qp.beq) : Eigen::VectorXd();
    const Eigen::VectorXd r_g = qp.Ain * res.z + s - qp.bin;
    const double mu = s.dot(lambda) / static_cast<double>(mi);

    res.iterations = it;
    res.primal_residual = std::max(inf_norm(r_p), inf_norm(r_g));
    res.dual_residual = inf_norm(r_d);
    res.gap = mu;

    const bool strict = res.primal_residual <= tol_ * scale_p &&
                        res.dual_residual <= tol_ * scale_d &&
                        mu <= tol_ * scale_d;
    // regularization leaves a small dual-residual floor on degenerate
    // problems; accept once the primal is exact and the gap has collapsed
    const bool relaxed = res.primal_residual <= tol_ * scale_p &&
                         res.dual_residual <= 1e4 * tol_ * scale_d &&
                         mu <= 1e-4 * tol_ * scale_d;
    if (strict || relaxed) {
      res.status = QPStatus::Optimal;
      res.lambda = lambda;
      res.objective = 0.5 * res.z.dot(qp.Q * res.z) + qp.c.dot(res.z);
      return res;
    }
    if (inf_norm(res.z) > kDivergenceLimit || inf_norm(lambda) > kDivergenceLimit) {
      res.status = QPStatus::MaxIter;  // classified by caller via phase 1
      res.lambda = lambda;
      res.objective = 0.5 * res.z.dot(qp.Q * res.z) + qp.c.dot(res.z);
      return res;
    }

    const Eigen::VectorXd d = lambda.cwiseQuotient(s);
    // scale-aware regularization keeps the reduced system solvable when a
    // degenerate optimal face leaves the weighted Gram matrix rank deficient
    const double reg = kStaticReg * (1.0 + d.maxCoeff());
    K.setZero();
    K.topLeftCorner(n, n) =
        qp.Q + qp.Ain.transpose() * d.asDiagonal() * qp.Ain +
        reg * Eigen::MatrixXd::Identity(n, n);
    if (p > 0) {
      K.topRightCorner(n, p) = qp.Aeq.transpose();
      K.bottomLeftCorner(p, n) = qp.Aeq;
      K.bottomRightCorner(p, p) = -kStaticReg * Eigen::MatrixXd::Identity(p, p);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);

    auto solve_dir = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dz,
                         Eigen::VectorXd& dy, Eigen::VectorXd& dl,
                         Eigen::VectorXd& ds) {
      rhs.head(n) = -r_d - qp.Ain.transpose() *
                              (d.cwiseProduct(r_g) - rc.cwiseQuotient(s));
      if (p > 0) rhs.tail(p) = -r_p;
      const Eigen::VectorXd sol = lu.solve(rhs);
      dz = sol.head(n);
      dy = sol.tail(p);
      dl = d.cwiseProduct(qp.Ain * dz + r_g) - rc.cwiseQuotient(s);
      ds = -r_g - qp.Ain * dz;
    };

    // Predictor.
    Eigen::VectorXd dz, dy, dl, ds;
    solve_dir(s.cwiseProduct(lambda), dz, dy, dl, ds);
    const double ap = step_to_boundary(s, ds, 1.0);
    const double ad = step_to_boundary(lambda, dl, 1.0);
    const double a_aff = std::min(ap, ad);
    const double mu_aff = (s + a_aff * ds).dot(lambda + a_aff * dl) /
                          static_cast<double>(mi);
    const double sigma = std::pow(mu_aff / mu, 3);

    // Corrector.
    Eigen::VectorXd rc = s.cwiseProduct(lambda) + ds.cwiseProduct(dl) -
                         sigma * mu * Eigen::VectorXd::Ones(mi);
    solve_dir(rc, dz, dy, dl, ds);
    if (!dz.allFinite() || !dl.allFinite() || !ds.allFinite()) {
      res.status = QPStatus::MaxIter;
      res.lambda = lambda;
      res.objective = 0.5 * res.z.dot(qp.Q * res.z) + qp.c.dot(res.z);
      return res;
    }
    const double alpha =
        std::min(step_to_boundary(s, ds, 0.995), step_to_boundary(lambda, dl, 0.995));

    res.z += alpha * dz;
    res.y += alpha * dy;
    s += alpha * ds;
    lambda += alpha * dl;
  }

  res.status = QPStatus::MaxIter;
  res.lambda = lambda;
  res.objective = 0.5 * res.z.dot(qp.Q * res.z) + qp.c.dot(res.z);
  return res;
}

// Elastic feasibility LP:  min t  s.t.  Aeq z = beq, Ain z - t 1 <= bin,
// t >= -1. Optimum > 0 certifies infeasibility of the original problem;
// the LP duals give a Farkas-type ray.
QPResult QPSolver::phase1(const QPInstance& qp) const {
  const Eigen::Index n = qp.num_vars();
  const Eigen::Index p = qp.Aeq.rows();
  const Eigen::Index mi = qp.Ain.rows();

  QPInstance ph;
  ph.Q = Eigen::MatrixXd::Zero(n + 1, n + 1);
  ph.c = Eigen::VectorXd::Zero(n + 1);
  ph.c(n) = 1.0;
  ph.Aeq = Eigen::MatrixXd::Zero(p, n + 1);
  if (p > 0) ph.Aeq.leftCols(n) = qp.Aeq;
  ph.beq = qp.beq;
  ph.Ain = Eigen::MatrixXd::Zero(mi + 1, n + 1);
  ph.Ain.topLeftCorner(mi, n) = qp.Ain;
  ph.Ain.col(n).head(mi).setConstant(-1.0);
  ph.Ain(mi, n) = -1.0;
  ph.bin = Eigen::VectorXd::Zero(mi + 1);
  ph.bin.head(mi) = qp.bin;
  ph.bin(mi) = 1.0;
  return run_ip(ph);
}

QPResult QPSolver::solve(const QPInstance& qp) const {
  qp.validate();

  // Row equilibration: unit max-abs constraint rows improve the
  // conditioning of the reduced KKT system. The feasible set is unchanged;
  // multipliers are scaled back before returning.
  QPInstance qs = qp;
  const Eigen::Index mi = qp.Ain.rows();
  const Eigen::Index p = qp.Aeq.rows();
  Eigen::VectorXd rin = Eigen::VectorXd::Ones(mi);
  Eigen::VectorXd req = Eigen::VectorXd::Ones(p);
  for (Eigen::Index i = 0; i < mi; ++i) {
    const double s = qp.Ain.row(i).cwiseAbs().maxCoeff();
    if (s > 0.0) {
      rin(i) = s;
      qs.Ain.row(i) /= s;
      qs.bin(i) /= s;
    }
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    const double s = qp.Aeq.row(i).cwiseAbs().maxCoeff();
    if (s > 0.0) {
      req(i) = s;
      qs.Aeq.row(i) /= s;
      qs.beq(i) /= s;
    }
  }
  auto unscale = [&](QPResult& r) {
    if (r.lambda.size() == mi) r.lambda = r.lambda.cwiseQuotient(rin);
    if (r.y.size() == p) r.y = r.y.cwiseQuotient(req);
    if (r.farkas.size() == mi + p) {
      r.farkas.head(mi) = r.farkas.head(mi).cwiseQuotient(rin).eval();
      r.farkas.tail(p) = r.farkas.tail(p).cwiseQuotient(req).eval();
    }
  };

  QPResult res = run_ip(qs);
  if (res.status == QPStatus::Optimal) {
    unscale(res);
    return res;
  }

  // Could not converge: classify via the elastic feasibility problem.
  QPResult p1 = phase1(qs);
  const double feas_tol = std::max(1e-7, 10.0 * tol_);
  if (p1.status == QPStatus::Optimal && p1.objective > feas_tol) {
    res.status = QPStatus::Infeasible;
    res.farkas.resize(mi + p);
    res.farkas.head(mi) = p1.lambda.head(mi);
    res.farkas.tail(p) = p1.y;
    unscale(res);
    return res;
  }
  if (p1.status == QPStatus::Optimal && res.status == QPStatus::MaxIter &&
      inf_norm(res.z) > kDivergenceLimit) {
    res.status = QPStatus::Unbounded;
  }
  unscale(res);
  return res;
}

QPResult QPSolver::solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& Aeq,
                            const Eigen::VectorXd& beq, const Eigen::MatrixXd& Ain,
                            const Eigen::VectorXd& bin) const {
  QPInstance qp;
  qp.Q = Eigen::MatrixXd::Zero(c.size(), c.size());
  qp.c = c;
  qp.Aeq = Aeq;
  qp.beq = beq;
  qp.Ain = Ain;
  qp.bin = bin;
  return solve(qp);
}

}  // namespace rmpc
