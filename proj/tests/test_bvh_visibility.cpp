#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "lod3kit/bvh.hpp"
#include "lod3kit/rng.hpp"
#include "lod3kit/visibility.hpp"

using namespace lod3kit;

namespace {

// random triangle soup inside [-5,5]^3, each triangle tagged with a wall id
std::vector<Triangle> random_soup(Rng& rng, int n, int walls) {
  std::vector<Triangle> tris;
  tris.reserve(n);
  for (int i = 0; i < n; ++i) {
    Point3 a{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    Vec3 e1{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Vec3 e2{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    tris.push_back({a, a + e1, a + e2, static_cast<int>(rng.uniform_int(0, walls - 1)), i});
  }
  return tris;
}

WallSurface square_wall(const std::string& id, double y, double w = 10.0, double h = 10.0) {
  WallSurface ws;
  ws.id = id;
  ws.exterior =
      LinearRing{{{0, y, 0}, {w, y, 0}, {w, y, h}, {0, y, h}, {0, y, 0}}};
  ws.corners = derive_corners(ws.exterior);
  return ws;
}

}  // namespace

TEST_CASE("triangle intersection basics", "[bvh]") {
  Triangle t{{0, 0, 0}, {2, 0, 0}, {0, 2, 0}, 0, 0};
  // straight down onto the hypotenuse midpoint region
  auto s = intersect_triangle({0.5, 0.5, 3.0}, {0, 0, -1}, t, 1e-9);
  REQUIRE(s.has_value());
  CHECK(*s == Catch::Approx(3.0));
  // miss: outside the triangle
  CHECK_FALSE(intersect_triangle({1.9, 1.9, 3.0}, {0, 0, -1}, t, 1e-9).has_value());
  // behind the origin
  CHECK_FALSE(intersect_triangle({0.5, 0.5, -1.0}, {0, 0, -1}, t, 1e-9).has_value());
  // parallel ray
  CHECK_FALSE(intersect_triangle({0.5, 0.5, 3.0}, {1, 0, 0}, t, 1e-9).has_value());
  // eps_hit rejects a hit closer than the epsilon
  CHECK_FALSE(intersect_triangle({0.5, 0.5, 1e-12}, {0, 0, -1}, t, 1e-9).has_value());
}

TEST_CASE("hit ordering breaks ties deterministically", "[bvh]") {
  Hit a{2.0, 1, 5}, b{2.0, 2, 3}, c{1.5, 9, 9};
  CHECK(hit_better(c, a));       // closer wins
  CHECK(hit_better(a, b));       // equal distance: lower wall id
  CHECK_FALSE(hit_better(b, a));
  Hit d{2.0, 1, 4};
  CHECK(hit_better(d, a));       // equal wall: lower triangle id
}

TEST_CASE("bvh agrees with exhaustive search", "[bvh]") {
  Rng rng(2024);
  std::vector<Triangle> tris = random_soup(rng, 1500, 40);
  Bvh bvh(tris);
  CHECK(bvh.triangles().size() == tris.size());

  int hits = 0;
  for (int k = 0; k < 3000; ++k) {
    Point3 o{rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-8, 8)};
    Vec3 d = normalized({rng.normal(), rng.normal(), rng.normal()});
    auto slow = nearest_hit_exhaustive(tris, o, d, 1e-9);
    auto fast = bvh.nearest(o, d, 1e-9);
    REQUIRE(slow.has_value() == fast.has_value());
    if (slow) {
      ++hits;
      CHECK(fast->wall == slow->wall);
      CHECK(fast->tri == slow->tri);
      CHECK(std::abs(fast->dist - slow->dist) < 1e-9);
    }
  }
  CHECK(hits > 500);  // the scene is dense enough for the test to mean something
}

TEST_CASE("bvh handles tiny and empty inputs", "[bvh]") {
  Bvh empty;
  CHECK_FALSE(empty.nearest({0, 0, 0}, {1, 0, 0}).has_value());
  Bvh one(std::vector<Triangle>{{{1, -1, -1}, {1, 1, -1}, {1, 0, 2}, 7, 0}});
  auto h = one.nearest({0, 0, 0}, {1, 0, 0});
  REQUIRE(h.has_value());
  CHECK(h->wall == 7);
  CHECK(h->dist == Catch::Approx(1.0));
}

TEST_CASE("degenerate triangles never produce hits", "[bvh]") {
  // zero-area sliver: all vertices collinear
  Bvh bvh(std::vector<Triangle>{{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, 0, 0}});
  CHECK_FALSE(bvh.nearest({0.5, -1, 0}, {0, 1, 0}).has_value());
}

TEST_CASE("rays point from the viewpoint at the laser return", "[visibility]") {
  Ray r = make_ray({1, 1, 1}, {4, 5, 1});
  CHECK(norm(r.direction) == Catch::Approx(1.0));
  CHECK(r.target_distance == Catch::Approx(5.0));
  CHECK(r.direction.x == Catch::Approx(3.0 / 5.0));
  CHECK(r.direction.y == Catch::Approx(4.0 / 5.0));
  CHECK_THROWS_AS(make_ray({1, 1, 1}, {1, 1, 1}), std::invalid_argument);

  ScanStation st{"s", {0, 0, 0}, {{1, 0, 0}, {0, 2, 0}}};
  auto rays = build_rays(st);
  REQUIRE(rays.size() == 2);
  CHECK(rays[1].target_distance == Catch::Approx(2.0));
}

TEST_CASE("point classification uses a closed tolerance band", "[visibility]") {
  VisibilityConfig cfg;  // t = 0.7
  auto classify = [&](double target, double hit) {
    Ray r{{0, 0, 0}, {1, 0, 0}, target};
    return classify_point(r, hit, cfg);
  };
  CHECK(*classify(10.0, 10.0) == PointState::Confirmed);
  CHECK(*classify(10.7, 10.0) == PointState::Confirmed);   // exactly hit + t
  CHECK(*classify(9.3, 10.0) == PointState::Confirmed);    // exactly hit - t
  CHECK(*classify(10.7000001, 10.0) == PointState::Conflict);
  CHECK(*classify(9.2999999, 10.0) == PointState::Unknown);
  CHECK(*classify(15.0, 10.0) == PointState::Conflict);
  CHECK(*classify(2.0, 10.0) == PointState::Unknown);
  Ray r{{0, 0, 0}, {1, 0, 0}, 5.0};
  CHECK_FALSE(classify_point(r, std::nullopt, cfg).has_value());
}

TEST_CASE("wall intersection from a frontal ray", "[visibility]") {
  WallSurface ws = square_wall("w", 4.0);
  Ray r = make_ray({5, -6, 5}, {5, 10, 5});
  auto d = intersect_wall(r, ws);
  REQUIRE(d.has_value());
  CHECK(*d == Catch::Approx(10.0));  // wall plane y=4 is 10 m along the ray
  // ray passing beside the wall
  Ray miss = make_ray({-5, -6, 5}, {-5, 10, 5});
  CHECK_FALSE(intersect_wall(miss, ws).has_value());
}

TEST_CASE("station classification is wall-attributed and thread-stable", "[visibility]") {
  WallSurface near_wall = square_wall("near", 4.0);
  WallSurface far_wall = square_wall("far", 12.0);
  std::vector<const WallSurface*> walls{&near_wall, &far_wall};
  WallScene scene = build_scene(walls);

  ScanStation st;
  st.station_id = "s1";
  st.viewpoint = {5, -10, 5};
  st.points.push_back({5, 4, 5});     // on the near wall: Confirmed
  st.points.push_back({5, 7, 5});     // 3 m behind the near wall: Conflict
  st.points.push_back({5, -2, 5});    // 8 m in front: Unknown
  st.points.push_back({5, 4.6, 5});   // within +0.7: still Confirmed
  st.points.push_back({50, 4, 50});   // misses everything

  VisibilityConfig cfg;
  auto res = classify_station(st, scene, cfg, 1);
  REQUIRE(res.size() == 5);
  CHECK(res[0].wall == 0);
  CHECK(res[0].state == PointState::Confirmed);
  CHECK(res[1].state == PointState::Conflict);
  CHECK(res[2].state == PointState::Unknown);
  CHECK(res[3].state == PointState::Confirmed);
  CHECK(res[4].wall == -1);
  // the nearest wall owns the return even when the point sits far behind it
  CHECK(res[1].wall == 0);
  // classified hit points lie on the prior surface, not at the return
  CHECK(res[1].hit_point.y == Catch::Approx(4.0));

  // thread count cannot change anything
  auto res4 = classify_station(st, scene, cfg, 4);
  REQUIRE(res4.size() == res.size());
  for (size_t i = 0; i < res.size(); ++i) {
    CHECK(res4[i].wall == res[i].wall);
    CHECK(res4[i].state == res[i].state);
  }
}

TEST_CASE("conflict map sizing and splatting", "[visibility]") {
  WallSurface ws = square_wall("w", 0.0, 6.0, 3.0);
  VisibilityConfig cfg;
  cfg.raster_resolution = 0.5;
  ConflictMap cm = make_conflict_map(ws, cfg);
  CHECK(cm.grid.width == 12);  // ceil(6 / 0.5)
  CHECK(cm.grid.height == 6);
  CHECK(cm.surface_id == "w");
  for (CmCell c : cm.grid.cells) CHECK(c == CmCell::Empty);

  // a confirmed return at the center of pixel (2,2)
  Point3 p = cm.frame.map(2.5 / 12.0, 2.5 / 6.0);
  CHECK(splat_hit(cm, p, PointState::Confirmed));
  CHECK(cm.grid.at(2, 2) == CmCell::Confirmed);
  // conflict beats confirmed on the same pixel
  CHECK(splat_hit(cm, p, PointState::Conflict));
  CHECK(cm.grid.at(2, 2) == CmCell::Conflict);
  // confirmed cannot downgrade it back
  CHECK(splat_hit(cm, p, PointState::Confirmed));
  CHECK(cm.grid.at(2, 2) == CmCell::Conflict);
  // off-wall points are ignored
  CHECK_FALSE(splat_hit(cm, cm.frame.map(1.5, 0.5), PointState::Confirmed));
}

TEST_CASE("merging conflict maps is precedence-based", "[visibility]") {
  WallSurface ws = square_wall("w", 0.0, 2.0, 1.0);
  VisibilityConfig cfg;
  cfg.raster_resolution = 0.5;
  ConflictMap a = make_conflict_map(ws, cfg);
  ConflictMap b = a;
  a.grid.at(0, 0) = CmCell::Confirmed;
  b.grid.at(0, 0) = CmCell::Conflict;
  b.grid.at(1, 0) = CmCell::Unknown;
  ConflictMap m = merge_conflict_maps(a, b);
  CHECK(m.grid.at(0, 0) == CmCell::Conflict);
  CHECK(m.grid.at(1, 0) == CmCell::Unknown);
  CHECK(merge_conflict_maps(a, b).grid == merge_conflict_maps(b, a).grid);

  ConflictMap other = make_conflict_map(square_wall("x", 0.0, 2.0, 1.0), cfg);
  CHECK_THROWS_AS(merge_conflict_maps(a, other), std::invalid_argument);
}

TEST_CASE("resampling keeps the map's identity", "[visibility]") {
  WallSurface ws = square_wall("w", 0.0, 4.0, 2.0);
  VisibilityConfig cfg;
  cfg.raster_resolution = 0.5;
  ConflictMap cm = make_conflict_map(ws, cfg);
  cm.grid.at(0, 0) = CmCell::Conflict;
  ConflictMap rs = resample_conflict_map(cm, 16, 8);
  CHECK(rs.grid.width == 16);
  CHECK(rs.grid.height == 8);
  CHECK(rs.surface_id == cm.surface_id);
  CHECK(rs.resolution == cm.resolution);
  CHECK(frame_equal(rs.frame, cm.frame, 0.0));
  CHECK(rs.grid.at(0, 0) == CmCell::Conflict);
  CHECK(rs.grid.at(1, 1) == CmCell::Conflict);  // nearest-neighbor block
}

TEST_CASE("sidecar line round-trips at full precision", "[visibility]") {
  WallSurface ws = square_wall("wall/17", 3.0, 5.0, 2.5);
  VisibilityConfig cfg;
  ConflictMap cm = make_conflict_map(ws, cfg);
  cm.frame.p1.x = 1.0 / 3.0;  // force a non-terminating decimal
  CmSidecar sc = parse_cm_sidecar(format_cm_sidecar(cm));
  CHECK(sc.surface_id == "wall/17");
  CHECK(sc.width == cm.grid.width);
  CHECK(sc.height == cm.grid.height);
  CHECK(sc.resolution == cm.resolution);
  CHECK(sc.frame.p1.x == cm.frame.p1.x);  // bit-exact through precision 17
  CHECK(frame_equal(sc.frame, cm.frame, 0.0));
  CHECK_THROWS(parse_cm_sidecar("id 4 4"));
}

TEST_CASE("conflict map png + sidecar io round-trips", "[visibility]") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "lod3kit_cm_io_test";
  fs::create_directories(dir);
  WallSurface ws = square_wall("w0", 0.0, 3.0, 2.0);
  VisibilityConfig cfg;
  cfg.raster_resolution = 0.25;
  ConflictMap cm = make_conflict_map(ws, cfg);
  cm.grid.at(3, 1) = CmCell::Conflict;
  cm.grid.at(0, 0) = CmCell::Confirmed;
  cm.grid.at(11, 7) = CmCell::Unknown;

  write_conflict_map(dir / "w0.png", cm);
  REQUIRE(fs::exists(dir / "w0.frame"));
  ConflictMap back = read_conflict_map(dir / "w0.png");
  CHECK(back.surface_id == cm.surface_id);
  CHECK(back.grid == cm.grid);
  CHECK(back.resolution == cm.resolution);
  CHECK(frame_equal(back.frame, cm.frame, 0.0));
  fs::remove_all(dir);
}
