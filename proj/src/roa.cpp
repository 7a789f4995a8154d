#include "rmpc/roa.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "rmpc/errors.hpp"
#include "rmpc/parallel.hpp"

namespace rmpc {

namespace {

// Widens the pinned-initial-state program by a free x0 block: the first d
// equality rows become xbar_0 - x0 = 0, x0 is confined to span(v), and the
// objective turns into the linear functional v'x0.
QPInstance free_x0_program(const AssembledQP& skeleton, const HPolytope& X,
                           const Eigen::VectorXd& v) {
  const int d = skeleton.layout.d;
  const int n = static_cast<int>(skeleton.layout.n_vars);
  const QPInstance& base = skeleton.qp;

  QPInstance lp;
  lp.Q = Eigen::MatrixXd::Zero(n + d, n + d);
  lp.c = Eigen::VectorXd::Zero(n + d);
  lp.c.tail(d) = v;

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
  const Eigen::MatrixXd Qfull =
      qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd Bperp = Qfull.rightCols(d - 1);

  const int n_eq = static_cast<int>(base.Aeq.rows());
  lp.Aeq = Eigen::MatrixXd::Zero(n_eq + d - 1, n + d);
  lp.Aeq.topLeftCorner(n_eq, n) = base.Aeq;
  lp.beq = Eigen::VectorXd::Zero(n_eq + d - 1);
  lp.beq.head(n_eq) = base.beq;
  lp.beq.head(d).setZero();
  lp.Aeq.block(0, n, d, d) = -Eigen::MatrixXd::Identity(d, d);
  lp.Aeq.block(n_eq, n, d - 1, d) = Bperp.transpose();

  // The robust rows cover predicted steps only; the initial state itself
  // must additionally lie in the state constraint set.
  const int nx = static_cast<int>(X.H().rows());
  lp.Ain = Eigen::MatrixXd::Zero(base.Ain.rows() + nx, n + d);
  lp.Ain.topLeftCorner(base.Ain.rows(), n) = base.Ain;
  lp.Ain.block(base.Ain.rows(), skeleton.layout.ox, nx, d) = X.H();
  lp.bin.resize(base.bin.size() + nx);
  lp.bin.head(base.bin.size()) = base.bin;
  lp.bin.tail(nx) = X.h();
  return lp;
}

bool feasible_at(const AssembledQP& skeleton, const QPSolver& solver,
                 const Eigen::VectorXd& x0) {
  AssembledQP prob = skeleton;
  prob.qp.beq.head(x0.size()) = x0;
  return solver.solve(prob.qp).status == QPStatus::Optimal;
}

std::optional<Eigen::VectorXd> roa_point_impl(const AssembledQP& skeleton,
                                              const HPolytope& X,
                                              const QPSolver& solver,
                                              const Eigen::VectorXd& v) {
  const QPInstance lp = free_x0_program(skeleton, X, v);
  const QPResult res = solver.solve(lp);
  if (res.status == QPStatus::MaxIter) {
    std::cerr << "roa_point: solver stalled along direction ["
              << v.transpose() << "]\n";
    return std::nullopt;
  }
  if (res.status != QPStatus::Optimal) return std::nullopt;
  Eigen::VectorXd x0 = res.z.tail(v.size());
  // substitution re-check; retreat toward the origin over numerical fuzz
  for (int attempt = 0; attempt < 20; ++attempt) {
    if (X.contains(x0, 1e-9) && feasible_at(skeleton, solver, x0)) return x0;
    x0 *= 0.999;
  }
  return std::nullopt;
}

AssembledQP build_skeleton(const UncertainSystem& system,
                           const TighteningBounds& bounds,
                           const TerminalIngredients& terminal,
                           const MpcOptions& options) {
  UncertainSystem sys = system;
  sys.set_XN(terminal.XN);
  const HorizonStacks stacks = build_stacks(sys, sys.N());
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(sys.d());
  if (sys.N() == 1)
    return assemble_case2(origin, sys, stacks, terminal.P_N, options);
  return assemble_case1(origin, sys, stacks, bounds, terminal.P_N, options);
}

}  // namespace

std::optional<Eigen::VectorXd> roa_point(const UncertainSystem& system,
                                         const TighteningBounds& bounds,
                                         const TerminalIngredients& terminal,
                                         const Eigen::VectorXd& v,
                                         const MpcOptions& options) {
  if (std::abs(v.norm() - 1.0) > 1e-9)
    throw RangeError("roa_point: v must be a unit vector");
  const AssembledQP skeleton = build_skeleton(system, bounds, terminal,
                                              options);
  const QPSolver solver(options.solver_tol, options.solver_max_iter);
  return roa_point_impl(skeleton, system.X(), solver, v);
}

ROAResult approximate_roa(const UncertainSystem& system,
                          const TighteningBounds& bounds,
                          const TerminalIngredients& terminal, int n_dirs,
                          const MpcOptions& options, int workers) {
  const int d = system.d();
  if (d == 2 && n_dirs < 3)
    throw RangeError("approximate_roa: n_dirs must be >= 3 in 2-D");
  if (d != 2)
    throw ConfigError("approximate_roa: only 2-D systems are supported");

  const AssembledQP skeleton = build_skeleton(system, bounds, terminal,
                                              options);
  const QPSolver solver(options.solver_tol, options.solver_max_iter);

  ROAResult out;
  out.directions.resize(n_dirs);
  out.points.resize(n_dirs);
  for (int k = 0; k < n_dirs; ++k) {
    const double theta = 2.0 * M_PI * k / n_dirs;
    out.directions[k] =
        (Eigen::VectorXd(2) << std::cos(theta), std::sin(theta)).finished();
  }
  parallel_for(
      n_dirs,
      [&](int k) {
        out.points[k] =
            roa_point_impl(skeleton, system.X(), solver, out.directions[k]);
      },
      workers);

  std::vector<Eigen::VectorXd> feasible;
  for (const auto& p : out.points)
    if (p) feasible.push_back(*p);
  out.hull = convex_hull_2d(feasible);
  out.volume = polygon_area(out.hull);
  return out;
}

std::vector<Eigen::VectorXd> convex_hull_2d(
    const std::vector<Eigen::VectorXd>& points) {
  std::vector<Eigen::VectorXd> pts = points;
  std::sort(pts.begin(), pts.end(),
            [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
              return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1));
            });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                          return (a - b).lpNorm<Eigen::Infinity>() < 1e-9;
                        }),
            pts.end());
  if (pts.size() < 3)
    throw DegenerateHullError("convex hull needs at least 3 distinct points");

  auto cross = [](const Eigen::VectorXd& o, const Eigen::VectorXd& a,
                  const Eigen::VectorXd& b) {
    return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
  };
  const std::size_t n = pts.size();
  std::vector<Eigen::VectorXd> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, lo = k + 1; i-- > 0;) {
    while (k >= lo && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3 || polygon_area(hull) <= 1e-12)
    throw DegenerateHullError("feasible points are collinear");
  return hull;
}

double polygon_area(const std::vector<Eigen::VectorXd>& hull) {
  double twice = 0.0;
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % n];
    twice += a(0) * b(1) - b(0) * a(1);
  }
  return 0.5 * std::abs(twice);
}

std::string roa_csv(const ROAResult& result) {
  std::ostringstream os;
  os.precision(17);
  const auto& rows = result.hull.empty() ? std::vector<Eigen::VectorXd>{}
                                         : result.hull;
  const int d = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  for (int j = 0; j < d; ++j) os << (j ? "," : "") << "x0_" << (j + 1);
  os << "\n";
  for (const auto& p : rows) {
    for (int j = 0; j < d; ++j) os << (j ? "," : "") << p(j);
    os << "\n";
  }
  return os.str();
}

namespace {

void svg_polygon(std::ostringstream& os,
                 const std::vector<Eigen::VectorXd>& verts, double sx,
                 double sy, double ox, double oy, const std::string& style) {
  os << "  <polygon points=\"";
  for (const auto& p : verts)
    os << (p(0) - ox) * sx << "," << (oy - p(1)) * sy << " ";
  os << "\" " << style << "/>\n";
}

}  // namespace

std::string roa_svg(const ROAResult& result, const UncertainSystem& system,
                    const TerminalIngredients& terminal) {
  const auto xv = system.X().vertices_2d();
  const auto nv = terminal.XN.vertices_2d();
  double lo_x = 1e30, hi_x = -1e30, lo_y = 1e30, hi_y = -1e30;
  for (const auto& p : xv) {
    lo_x = std::min(lo_x, p(0));
    hi_x = std::max(hi_x, p(0));
    lo_y = std::min(lo_y, p(1));
    hi_y = std::max(hi_y, p(1));
  }
  const double pad = 0.05 * std::max(hi_x - lo_x, hi_y - lo_y);
  lo_x -= pad;
  lo_y -= pad;
  hi_x += pad;
  hi_y += pad;
  const double W = 640.0, H = 640.0;
  const double sx = W / (hi_x - lo_x), sy = H / (hi_y - lo_y);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
     << "width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << " " << H << "\">\n";
  svg_polygon(os, xv, sx, sy, lo_x, hi_y,
              "fill=\"none\" stroke=\"#444444\" stroke-width=\"2\"");
  svg_polygon(os, result.hull, sx, sy, lo_x, hi_y,
              "fill=\"#4a90d9\" fill-opacity=\"0.25\" stroke=\"#1f5fa0\" "
              "stroke-width=\"2\"");
  svg_polygon(os, nv, sx, sy, lo_x, hi_y,
              "fill=\"#d94a4a\" fill-opacity=\"0.25\" stroke=\"#a01f1f\" "
              "stroke-width=\"2\"");
  os << "</svg>\n";
  return os.str();
}

}  // namespace rmpc
