#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "lod3kit/geom.hpp"
#include "lod3kit/rng.hpp"

using namespace lod3kit;

TEST_CASE("vector algebra basics", "[geom]") {
  Vec3 a{1, 2, 3}, b{4, -5, 6};
  CHECK(dot(a, b) == 1 * 4 + 2 * -5 + 3 * 6);
  Vec3 c = cross(Vec3{1, 0, 0}, Vec3{0, 1, 0});
  CHECK(c.x == 0.0);
  CHECK(c.y == 0.0);
  CHECK(c.z == 1.0);
  CHECK(norm(Vec3{3, 4, 0}) == Catch::Approx(5.0));
  Vec3 n = normalized(Vec3{0, 0, 7});
  CHECK(norm(n) == Catch::Approx(1.0));
  CHECK_FALSE(finite(Vec3{1, std::numeric_limits<double>::quiet_NaN(), 0}));
  CHECK(finite(Vec3{1, 2, 3}));
}

TEST_CASE("signed area orientation and magnitude", "[geom]") {
  // CCW unit square -> +1, reversed -> -1
  std::vector<Vec2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(signed_area(sq) == Catch::Approx(1.0));
  std::reverse(sq.begin(), sq.end());
  CHECK(signed_area(sq) == Catch::Approx(-1.0));
  std::vector<Vec2> tri{{0, 0}, {2, 0}, {0, 2}};
  CHECK(signed_area(tri) == Catch::Approx(2.0));
}

TEST_CASE("point in polygon, including concave shapes", "[geom]") {
  // L-shape: the notch at (1.5, 1.5) is outside
  std::vector<Vec2> ell{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  CHECK(point_in_polygon({0.5, 0.5}, ell));
  CHECK(point_in_polygon({0.5, 1.5}, ell));
  CHECK_FALSE(point_in_polygon({1.5, 1.5}, ell));
  CHECK_FALSE(point_in_polygon({3.0, 0.5}, ell));
}

TEST_CASE("segment intersection cases", "[geom]") {
  CHECK(segments_intersect({0, 0}, {2, 2}, {0, 2}, {2, 0}));        // proper cross
  CHECK(segments_intersect({0, 0}, {2, 0}, {1, 0}, {1, 1}));        // touch mid-edge
  CHECK(segments_intersect({0, 0}, {1, 0}, {1, 0}, {2, 1}));        // shared endpoint
  CHECK(segments_intersect({0, 0}, {3, 0}, {1, 0}, {2, 0}));        // collinear overlap
  CHECK_FALSE(segments_intersect({0, 0}, {1, 0}, {2, 0}, {3, 0}));  // collinear apart
  CHECK_FALSE(segments_intersect({0, 0}, {1, 1}, {2, 0}, {3, 1}));  // parallel offset
}

TEST_CASE("ring self-intersection detects bow-ties", "[geom]") {
  std::vector<Vec2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK_FALSE(ring_self_intersects(square));
  std::vector<Vec2> bowtie{{0, 0}, {1, 1}, {1, 0}, {0, 1}};
  CHECK(ring_self_intersects(bowtie));
  // spike: an edge doubling back over its neighbor
  std::vector<Vec2> spike{{0, 0}, {2, 0}, {1, 0}, {1, 1}};
  CHECK(ring_self_intersects(spike));
}

TEST_CASE("plane fit recovers exact planes", "[geom]") {
  // z = 2x - y + 3, sampled on a grid; normal ~ (2,-1,-1)/sqrt(6)
  std::vector<Vec3> pts;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      double x = i * 0.7, y = j * 1.3;
      pts.push_back({x, y, 2 * x - y + 3});
    }
  PlaneFit f = fit_plane(pts);
  CHECK(f.max_dev < 1e-9);
  Vec3 expect = normalized(Vec3{2, -1, -1});
  double align = std::abs(dot(f.normal, expect));
  CHECK(align == Catch::Approx(1.0).epsilon(1e-9));
  // every input point satisfies the plane equation through the centroid
  for (const auto& p : pts) CHECK(std::abs(dot(p - f.centroid, f.normal)) < 1e-9);
}

TEST_CASE("newell normal of an axis-aligned ring", "[geom]") {
  std::vector<Vec3> ring{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  Vec3 n = normalized(newell_normal(ring));
  CHECK(n.x == Catch::Approx(0.0).margin(1e-12));
  CHECK(n.y == Catch::Approx(0.0).margin(1e-12));
  CHECK(n.z == Catch::Approx(1.0));
}

TEST_CASE("plane basis is orthonormal", "[geom]") {
  Rng rng(42);
  for (int k = 0; k < 50; ++k) {
    Vec3 n = normalized(Vec3{rng.normal(), rng.normal(), rng.normal()});
    auto [e1, e2] = plane_basis(n);
    CHECK(norm(e1) == Catch::Approx(1.0));
    CHECK(norm(e2) == Catch::Approx(1.0));
    CHECK(std::abs(dot(e1, e2)) < 1e-12);
    CHECK(std::abs(dot(e1, n)) < 1e-12);
    CHECK(std::abs(dot(e2, n)) < 1e-12);
  }
}

TEST_CASE("convex hull of a noisy square", "[geom]") {
  std::vector<Vec2> pts{{0, 0}, {4, 0}, {4, 4}, {0, 4}, {2, 2}, {1, 3}, {3, 1}, {2, 0}};
  std::vector<Vec2> hull = convex_hull(pts);
  REQUIRE(hull.size() >= 4);
  // all corners present, no interior point survives
  auto has = [&](Vec2 q) {
    return std::any_of(hull.begin(), hull.end(),
                       [&](Vec2 p) { return p.x == q.x && p.y == q.y; });
  };
  CHECK(has({0, 0}));
  CHECK(has({4, 0}));
  CHECK(has({4, 4}));
  CHECK(has({0, 4}));
  CHECK_FALSE(has({2, 2}));
  CHECK(std::abs(signed_area(hull)) == Catch::Approx(16.0));
}

TEST_CASE("minimum oriented rectangle hugs a rotated box", "[geom]") {
  // rotate a 3x1 box by an arbitrary angle and recover its area
  double ang = 0.6435011087932844;  // atan2(3,4), nothing special
  double c = std::cos(ang), s = std::sin(ang);
  std::vector<Vec2> base{{0, 0}, {3, 0}, {3, 1}, {0, 1}, {1.5, 0.5}, {2.0, 0.25}};
  std::vector<Vec2> pts;
  for (const auto& p : base) pts.push_back({c * p.x - s * p.y, s * p.x + c * p.y});
  OrientedRect r = min_oriented_rect(pts);
  double area = (r.u_max - r.u_min) * (r.v_max - r.v_min);
  CHECK(area == Catch::Approx(3.0).epsilon(1e-9));
  // every point falls inside the rectangle's interval bounds
  for (const auto& p : pts) {
    double pu = dot(p, r.axis_u), pv = dot(p, r.axis_v);
    CHECK(pu >= r.u_min - 1e-9);
    CHECK(pu <= r.u_max + 1e-9);
    CHECK(pv >= r.v_min - 1e-9);
    CHECK(pv <= r.v_max + 1e-9);
  }
  CHECK_THROWS_AS(min_oriented_rect(std::vector<Vec2>{{1, 1}}), std::invalid_argument);
}

TEST_CASE("ear clipping preserves area and triangle count", "[geom]") {
  auto total_area = [](std::span<const Vec2> poly, const std::vector<std::array<int, 3>>& tris) {
    double a = 0.0;
    for (const auto& t : tris) {
      std::vector<Vec2> tri{poly[t[0]], poly[t[1]], poly[t[2]]};
      a += std::abs(signed_area(tri));
    }
    return a;
  };

  std::vector<Vec2> square{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  auto tris = ear_clip(square);
  CHECK(tris.size() == 2);
  CHECK(total_area(square, tris) == Catch::Approx(4.0));

  // concave L, both windings
  std::vector<Vec2> ell{{0, 0}, {3, 0}, {3, 1}, {1, 1}, {1, 3}, {0, 3}};
  tris = ear_clip(ell);
  CHECK(tris.size() == ell.size() - 2);
  CHECK(total_area(ell, tris) == Catch::Approx(5.0));
  std::reverse(ell.begin(), ell.end());
  tris = ear_clip(ell);
  CHECK(total_area(ell, tris) == Catch::Approx(5.0));

  // closed input (duplicate last vertex) is accepted
  std::vector<Vec2> closed{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}};
  tris = ear_clip(closed);
  CHECK(tris.size() == 2);
}

TEST_CASE("wall frame maps corners and stays on the plane", "[geom]") {
  // vertical wall in the y=2 plane, 6 m wide, 3 m tall, v pointing down
  Point3 p1{0, 2, 3}, p2{6, 2, 3}, p3{0, 2, 0}, p4{6, 2, 0};
  WallFrame f = WallFrame::from_corners(p1, p2, p3, p4);
  CHECK(f.width == Catch::Approx(6.0));
  CHECK(f.height == Catch::Approx(3.0));
  CHECK(distance(f.map(0, 0), p1) < 1e-12);
  CHECK(distance(f.map(1, 0), p2) < 1e-12);
  CHECK(distance(f.map(0, 1), p3) < 1e-12);
  CHECK(distance(f.map(1, 1), p4) < 1e-12);

  Rng rng(7);
  for (int k = 0; k < 200; ++k) {
    double u = rng.uniform01(), v = rng.uniform01();
    Point3 p = f.map(u, v);
    CHECK(std::abs(p.y - 2.0) < 1e-12);  // on the wall plane
    Vec2 back = f.uv(p);
    CHECK(back.x == Catch::Approx(u).margin(1e-12));
    CHECK(back.y == Catch::Approx(v).margin(1e-12));
  }
  CHECK_THROWS_AS(WallFrame::from_corners(p1, p1, p3, p4), std::invalid_argument);
}

TEST_CASE("frame equality tolerance", "[geom]") {
  Point3 p1{0, 0, 2}, p2{4, 0, 2}, p3{0, 0, 0}, p4{4, 0, 0};
  WallFrame a = WallFrame::from_corners(p1, p2, p3, p4);
  WallFrame b = WallFrame::from_corners({0, 0, 2.0005}, p2, p3, p4);
  CHECK(frame_equal(a, b, 1e-3));
  CHECK_FALSE(frame_equal(a, b, 1e-4));
}

TEST_CASE("rect intersection area and IoU", "[geom]") {
  Rect2 a{0, 0, 2, 2}, b{1, 1, 3, 3}, c{5, 5, 6, 6};
  CHECK(rect_intersection_area(a, b) == Catch::Approx(1.0));
  CHECK(rect_intersection_area(a, c) == 0.0);
  // |a|=4, |b|=4, inter=1 -> union=7
  CHECK(rect_iou(a, b) == Catch::Approx(1.0 / 7.0));
  CHECK(rect_iou(a, a) == Catch::Approx(1.0));
  CHECK(rect_iou(a, c) == 0.0);
}
