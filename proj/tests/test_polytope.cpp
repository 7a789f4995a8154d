#include <doctest.h>

#include <Eigen/Dense>

#include "rmpc/polytope.hpp"

using namespace rmpc;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

TEST_CASE("box construction, membership and support") {
  HPolytope box = HPolytope::box(Vector2d(-1, -2), Vector2d(3, 4));
  CHECK(box.dim() == 2);
  CHECK(box.contains(Vector2d(0, 0)));
  CHECK(box.contains(Vector2d(3, 4)));
  CHECK(!box.contains(Vector2d(3.001, 0)));
  CHECK(box.contains(Vector2d(3.001, 0), 1e-2));

  // support of a box is attained at the matching corner
  CHECK(box.support(Vector2d(1, 0)) == doctest::Approx(3).epsilon(1e-9));
  CHECK(box.support(Vector2d(-1, -1)) == doctest::Approx(1 + 2).epsilon(1e-9));
  VectorXd p = box.support_point(Vector2d(1, 1));
  CHECK(p(0) == doctest::Approx(3).epsilon(1e-7));
  CHECK(p(1) == doctest::Approx(4).epsilon(1e-7));
}

TEST_CASE("symmetric ball helper") {
  HPolytope w = HPolytope::inf_ball(2, 0.1);
  CHECK(w.num_rows() == 4);
  CHECK(w.support(Vector2d(1, 1)) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(w.contains(Vector2d(0.1, -0.1)));
  CHECK(!w.contains(Vector2d(0.11, 0)));
}

TEST_CASE("intersection and redundancy removal") {
  HPolytope a = HPolytope::inf_ball(2, 2.0);
  HPolytope b = HPolytope::inf_ball(2, 1.0);
  HPolytope c = a.intersect(b);
  // intersect prunes the redundant rows of the larger ball on the way out
  CHECK(c.num_rows() == 4);
  CHECK(c.support(Vector2d(1, 0)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(c.contains(Vector2d(1, 1)));
  CHECK(!c.contains(Vector2d(1.5, 0)));
}

TEST_CASE("duplicate facets are pruned to a single copy") {
  MatrixXd H(6, 2);
  VectorXd h(6);
  H << 1, 0, 1, 0, -1, 0, 0, 1, 0, -1, 1, 0;
  h << 1, 1, 1, 1, 1, 1;
  HPolytope p(H, h);
  HPolytope r = p.remove_redundant();
  CHECK(r.num_rows() == 4);
  CHECK(r.support(Vector2d(1, 0)) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("subset relation via support functions") {
  HPolytope small = HPolytope::inf_ball(2, 1.0);
  HPolytope big = HPolytope::inf_ball(2, 1.5);
  CHECK(small.subset_of(big));
  CHECK(!big.subset_of(small));
  CHECK(small.subset_of(small));
}

TEST_CASE("2-D vertex enumeration of a box") {
  HPolytope box = HPolytope::box(Vector2d(-1, -1), Vector2d(2, 3));
  auto verts = box.vertices_2d();
  REQUIRE(verts.size() == 4);
  double area = 0;
  // shoelace over the returned ordering's convex hull via support checks
  for (const auto& v : verts) {
    CHECK(box.contains(v, 1e-9));
    // every vertex of a box has both coordinates at a bound
    CHECK(((std::abs(v(0) + 1) < 1e-9) || (std::abs(v(0) - 2) < 1e-9)));
    CHECK(((std::abs(v(1) + 1) < 1e-9) || (std::abs(v(1) - 3) < 1e-9)));
  }
  (void)area;
}

TEST_CASE("emptiness detection") {
  MatrixXd H(2, 1);
  VectorXd h(2);
  H << 1, -1;
  h << -1, 0;  // x <= -1 and x >= 0
  CHECK(HPolytope(H, h).is_empty());
  CHECK(!HPolytope::inf_ball(1, 0.5).is_empty());
}

TEST_CASE("chebyshev-like center is strictly inside") {
  HPolytope box = HPolytope::box(Vector2d(0, 0), Vector2d(4, 2));
  VectorXd c = box.chebyshev_center();
  CHECK(box.contains(c, -1e-6));  // strictly interior margin
  CHECK(c(0) > 0.5);
  CHECK(c(0) < 3.5);
}
