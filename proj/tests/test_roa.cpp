#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "rmpc/roa.hpp"
#include "reference_problem.hpp"

using namespace rmpc;
using rmpc_test::ReferenceProblem;
using Eigen::Vector2d;
using Eigen::VectorXd;

TEST_CASE("convex hull of a square with interior points") {
  std::vector<VectorXd> pts;
  pts.push_back(Vector2d(0, 0));
  pts.push_back(Vector2d(2, 0));
  pts.push_back(Vector2d(2, 2));
  pts.push_back(Vector2d(0, 2));
  pts.push_back(Vector2d(1, 1));    // interior
  pts.push_back(Vector2d(1, 0.5));  // interior
  auto hull = convex_hull_2d(pts);
  CHECK(hull.size() == 4);
  CHECK(polygon_area(hull) == doctest::Approx(4.0).epsilon(1e-12));
  // counter-clockwise orientation: positive cross products
  for (size_t i = 0; i < hull.size(); ++i) {
    Vector2d a = hull[i], b = hull[(i + 1) % hull.size()],
             c = hull[(i + 2) % hull.size()];
    double cross = (b.x() - a.x()) * (c.y() - a.y()) -
                   (b.y() - a.y()) * (c.x() - a.x());
    CHECK(cross > 0);
  }
}

TEST_CASE("degenerate hulls are rejected") {
  std::vector<VectorXd> collinear;
  collinear.push_back(Vector2d(0, 0));
  collinear.push_back(Vector2d(1, 1));
  collinear.push_back(Vector2d(2, 2));
  CHECK_THROWS_AS(convex_hull_2d(collinear), DegenerateHullError);
  std::vector<VectorXd> two;
  two.push_back(Vector2d(0, 0));
  two.push_back(Vector2d(1, 0));
  CHECK_THROWS_AS(convex_hull_2d(two), DegenerateHullError);
}

TEST_CASE("directional extreme point lies on its ray, inside constraints") {
  const auto& p = ReferenceProblem::get();
  Vector2d v(1, 0);
  auto pt = roa_point(p.sys, p.bounds.at(3), p.terminal, v, p.cfg.mpc);
  REQUIRE(pt.has_value());
  // on the ray of -v (minimizing v'x0 walks toward -v)
  CHECK(std::abs((*pt)(1)) < 1e-7);
  CHECK((*pt)(0) < 0);
  CHECK(p.sys.X().contains(*pt, 1e-7));
  // frozen regression: the sweep reaches about -7.35 along this axis
  CHECK(std::abs((*pt)(0)) > 7.0);
}

TEST_CASE("coarse directional sweep yields a sane inner approximation") {
  const auto& p = ReferenceProblem::get();
  ROAResult roa = approximate_roa(p.sys, p.bounds.at(3), p.terminal, 8,
                                  p.cfg.mpc, 4);
  CHECK(roa.directions.size() == 8);
  REQUIRE(roa.hull.size() >= 3);
  CHECK(roa.volume > 0.0);
  CHECK(roa.volume <= 256.0);  // cannot exceed the state box
  for (const auto& h : roa.hull) CHECK(p.sys.X().contains(h, 1e-7));
  // frozen regression: the 8-direction hull covers about 207 area units
  CHECK(roa.volume > 180.0);
}

TEST_CASE("csv and svg emission") {
  const auto& p = ReferenceProblem::get();
  ROAResult roa = approximate_roa(p.sys, p.bounds.at(3), p.terminal, 4,
                                  p.cfg.mpc, 4);
  std::string csv = roa_csv(roa);
  CHECK(csv.find("x0_1") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') >= 4);
  std::string svg = roa_svg(roa, p.sys, p.terminal);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("script") == std::string::npos);
}
