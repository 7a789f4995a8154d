#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "rmpc/terminal.hpp"
#include "reference_problem.hpp"

using namespace rmpc;
using rmpc_test::ReferenceProblem;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

TEST_CASE("robust stability certificate exists for the reference gain") {
  const auto& p = ReferenceProblem::get();
  auto [ok, P] = check_robust_stability(*p.cfg.system, p.cfg.K);
  REQUIRE(ok);
  // the certificate contracts at every closed-loop vertex pair
  for (const auto& dA : p.sys.deltaA_vertices())
    for (const auto& dB : p.sys.deltaB_vertices()) {
      MatrixXd Acl = p.sys.A_bar() + dA + (p.sys.B_bar() + dB) * p.cfg.K;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(Acl.transpose() * P * Acl -
                                                 P);
      CHECK(es.eigenvalues().maxCoeff() < 1e-8);
    }
}

TEST_CASE("an unstabilizing gain is rejected") {
  const auto& p = ReferenceProblem::get();
  // K = 0 leaves the open-loop nominal system, which is unstable here
  MatrixXd K0 = MatrixXd::Zero(1, 2);
  auto [ok, P] = check_robust_stability(*p.cfg.system, K0);
  CHECK(!ok);
}

TEST_CASE("frozen fixed-point iteration count and facet count") {
  // Regression oracle: two independent implementations of the invariant-set
  // recursion agree on 9 reported passes (the last pass confirms the fixed
  // point) and 28 irredundant facets for the bundled problem.
  const auto& p = ReferenceProblem::get();
  CHECK(p.terminal.iterations == 9);
  CHECK(p.terminal.XN.num_rows() == 28);
}

TEST_CASE("frozen terminal cost matrix") {
  // Cross-checked against an independent discrete Lyapunov solve.
  const auto& p = ReferenceProblem::get();
  CHECK(p.terminal.P_N(0, 0) ==
        doctest::Approx(81.3503684469967).epsilon(1e-12));
  CHECK(p.terminal.P_N(0, 1) ==
        doctest::Approx(14.8627585974251).epsilon(1e-12));
  CHECK(p.terminal.P_N(1, 0) ==
        doctest::Approx(14.8627585974251).epsilon(1e-12));
  CHECK(p.terminal.P_N(1, 1) ==
        doctest::Approx(22.3812871088627).epsilon(1e-12));
}

TEST_CASE("terminal cost solves its discrete Lyapunov equation") {
  const auto& p = ReferenceProblem::get();
  MatrixXd Acl = p.sys.A_bar() + p.sys.B_bar() * p.cfg.K;
  MatrixXd rhs = p.sys.P() + p.cfg.K.transpose() * p.sys.R() * p.cfg.K;
  MatrixXd resid =
      Acl.transpose() * p.terminal.P_N * Acl - p.terminal.P_N + rhs;
  CHECK(resid.lpNorm<Eigen::Infinity>() < 1e-9);
  // symmetric positive definite
  CHECK((p.terminal.P_N - p.terminal.P_N.transpose())
            .lpNorm<Eigen::Infinity>() < 1e-12);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(p.terminal.P_N);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("terminal set respects state and input constraints") {
  const auto& p = ReferenceProblem::get();
  CHECK(p.terminal.XN.subset_of(p.sys.X()));
  // input constraint under the terminal gain: max over XN of |K x| <= 4
  VectorXd k = p.cfg.K.row(0).transpose();
  CHECK(p.terminal.XN.support(k) <= 4.0 + 1e-9);
  CHECK(p.terminal.XN.support(-k) <= 4.0 + 1e-9);
}

TEST_CASE("terminal set is robust positively invariant (deterministic)") {
  // One-step image inclusion via support functions: for every closed-loop
  // vertex pair, Acl * XN + W must lie inside XN.
  const auto& p = ReferenceProblem::get();
  const HPolytope& XN = p.terminal.XN;
  const HPolytope& W = p.sys.W();
  for (const auto& dA : p.sys.deltaA_vertices())
    for (const auto& dB : p.sys.deltaB_vertices()) {
      MatrixXd Acl = p.sys.A_bar() + dA + (p.sys.B_bar() + dB) * p.cfg.K;
      for (Eigen::Index i = 0; i < XN.num_rows(); ++i) {
        VectorXd n = XN.H().row(i).transpose();
        double worst =
            XN.support(Acl.transpose() * n) + W.support(n);
        CHECK(worst <= XN.h()(i) + 1e-8);
      }
    }
}

TEST_CASE("terminal set is maximal: inflating it leaves the constraints") {
  // A 2% inflation must break membership in the constraint region (here it
  // pushes past the state box, which the fixed point presses against);
  // otherwise a strictly larger admissible invariant set would exist.
  const auto& p = ReferenceProblem::get();
  const HPolytope& XN = p.terminal.XN;
  HPolytope bigger(XN.H(), XN.h() * 1.02);
  VectorXd k = p.cfg.K.row(0).transpose();
  const bool admissible = bigger.subset_of(p.sys.X()) &&
                          bigger.support(k) <= 4.0 + 1e-8 &&
                          bigger.support(-k) <= 4.0 + 1e-8;
  CHECK(!admissible);
  // the fixed point touches the state box: full extent +-8 along x1
  CHECK(XN.support(Vector2d(1, 0)) == doctest::Approx(8.0).epsilon(1e-8));
  CHECK(XN.support(Vector2d(-1, 0)) == doctest::Approx(8.0).epsilon(1e-8));
}
