#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lod3kit/bvh.hpp"
#include "lod3kit/citygml.hpp"
#include "lod3kit/geom.hpp"
#include "lod3kit/image_png.hpp"
#include "lod3kit/raster.hpp"
#include "lod3kit/threads.hpp"

namespace lod3kit {

struct ScanStation {
  std::string station_id;
  Point3 viewpoint;
  std::vector<Point3> points;
};

struct Ray {
  Point3 origin;
  Vec3 direction;             // unit
  double target_distance = 0; // |p - v|, meters
};

struct VisibilityConfig {
  double tolerance_t = 0.7;        // meters around the prior surface
  double raster_resolution = 0.05; // meters per conflict-map pixel
  double eps_hit = 1e-9;           // minimum accepted ray parameter
};

/// Per-wall conflict texture; the frame ties pixel (x,y) to wall-plane
/// meters, row 0 at the wall top.
struct ConflictMap {
  std::string surface_id;
  CmGrid grid;
  WallFrame frame;
  double resolution = 0.05;
};

// ---------------------------------------------------------------------------
// Rays and classification
// ---------------------------------------------------------------------------

inline Ray make_ray(const Point3& viewpoint, const Point3& p) {
  Vec3 d = p - viewpoint;
  double len = norm(d);
  if (len < 1e-6)
    throw std::invalid_argument("laser point coincides with the viewpoint");
  return Ray{viewpoint, d / len, len};
}

/// One ray per laser return, pointing from the viewpoint at the point.
inline std::vector<Ray> build_rays(const ScanStation& station) {
  std::vector<Ray> rays;
  rays.reserve(station.points.size());
  for (const auto& p : station.points) rays.push_back(make_ray(station.viewpoint, p));
  return rays;
}

/// Nearest positive intersection of a ray with one wall's exterior
/// surface (interior rings are ignored for prior walls).
inline std::optional<double> intersect_wall(const Ray& ray, const WallSurface& ws,
                                            double eps_hit = 1e-9) {
  std::vector<Point3> pts = ws.exterior.open_vertices();
  PlaneFit plane = fit_plane(pts);
  auto [e1, e2] = plane_basis(plane.normal);
  std::vector<Vec2> flat = project_to_plane(pts, plane.centroid, e1, e2);
  std::optional<double> best;
  for (const auto& [i0, i1, i2] : ear_clip(flat)) {
    Triangle t{pts[i0], pts[i1], pts[i2], 0, 0};
    if (auto s = intersect_triangle(ray.origin, ray.direction, t, eps_hit))
      if (!best || *s < *best) best = s;
  }
  return best;
}

/// The visibility trichotomy against the nearest prior hit. Boundary
/// distances (target exactly hit ± t) count as Confirmed.
inline std::optional<PointState> classify_point(const Ray& ray, std::optional<double> hit,
                                                const VisibilityConfig& cfg) {
  if (!hit) return std::nullopt;
  double d = ray.target_distance;
  if (d > *hit + cfg.tolerance_t) return PointState::Conflict;
  if (d < *hit - cfg.tolerance_t) return PointState::Unknown;
  return PointState::Confirmed;
}

// ---------------------------------------------------------------------------
// Scene index
// ---------------------------------------------------------------------------

/// Triangulated wall set under one BVH; wall indices refer to `walls`.
struct WallScene {
  std::vector<const WallSurface*> walls;
  Bvh bvh;
};

inline WallScene build_scene(const std::vector<const WallSurface*>& walls) {
  WallScene scene;
  scene.walls = walls;
  std::vector<Triangle> tris;
  int tri_ix = 0;
  for (size_t w = 0; w < walls.size(); ++w) {
    std::vector<Point3> pts = walls[w]->exterior.open_vertices();
    PlaneFit plane = fit_plane(pts);
    auto [e1, e2] = plane_basis(plane.normal);
    std::vector<Vec2> flat = project_to_plane(pts, plane.centroid, e1, e2);
    for (const auto& [i0, i1, i2] : ear_clip(flat))
      tris.push_back({pts[i0], pts[i1], pts[i2], static_cast<int>(w), tri_ix++});
  }
  scene.bvh = Bvh(std::move(tris));
  return scene;
}

/// One classified laser return attributed to a wall.
struct ClassifiedHit {
  int wall = -1;
  PointState state = PointState::Unknown;
  Point3 hit_point;
};

/// Classifies every station point against its nearest wall. Results are
/// index-aligned with the input points (wall -1 where the ray misses all
/// priors), so thread count cannot change the outcome.
inline std::vector<ClassifiedHit> classify_station(const ScanStation& station,
                                                   const WallScene& scene,
                                                   const VisibilityConfig& cfg,
                                                   int threads = 1) {
  std::vector<ClassifiedHit> out(station.points.size());
  parallel_for(station.points.size(), threads, [&](size_t i) {
    Ray ray = make_ray(station.viewpoint, station.points[i]);
    auto hit = scene.bvh.nearest(ray.origin, ray.direction, cfg.eps_hit);
    if (!hit) return;
    auto state = classify_point(ray, hit->dist, cfg);
    out[i].wall = hit->wall;
    out[i].state = *state;
    out[i].hit_point = ray.origin + ray.direction * hit->dist;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

inline ConflictMap make_conflict_map(const WallSurface& ws, const VisibilityConfig& cfg) {
  ConflictMap cm;
  cm.surface_id = ws.id;
  cm.frame = wall_frame(ws);
  cm.resolution = cfg.raster_resolution;
  int w = static_cast<int>(std::ceil(cm.frame.width / cfg.raster_resolution));
  int h = static_cast<int>(std::ceil(cm.frame.height / cfg.raster_resolution));
  cm.grid = CmGrid(std::max(1, w), std::max(1, h), CmCell::Empty);
  return cm;
}

/// Bins one wall-plane hit into its pixel under the precedence rule;
/// returns false (and counts nothing) when the hit is outside the frame.
inline bool splat_hit(ConflictMap& cm, const Point3& hit_point, PointState state) {
  Vec2 uv = cm.frame.uv(hit_point);
  constexpr double kSlack = 1e-9;
  if (uv.x < -kSlack || uv.x > 1.0 + kSlack || uv.y < -kSlack || uv.y > 1.0 + kSlack)
    return false;
  double u = std::clamp(uv.x, 0.0, 1.0);
  double v = std::clamp(uv.y, 0.0, 1.0);
  int px = std::min(cm.grid.width - 1,
                    static_cast<int>(std::floor(u * cm.frame.width / cm.resolution)));
  int py = std::min(cm.grid.height - 1,
                    static_cast<int>(std::floor(v * cm.frame.height / cm.resolution)));
  CmCell& cell = cm.grid.at(px, py);
  cell = merge_cells(cell, to_cell(state));
  return true;
}

struct RasterizeStats {
  size_t binned = 0;
  size_t out_of_frame = 0;
};

inline ConflictMap rasterize_conflict_map(const WallSurface& ws,
                                          const std::vector<ClassifiedHit>& hits,
                                          const VisibilityConfig& cfg,
                                          RasterizeStats* stats = nullptr) {
  ConflictMap cm = make_conflict_map(ws, cfg);
  RasterizeStats local;
  for (const auto& h : hits) {
    if (splat_hit(cm, h.hit_point, h.state))
      ++local.binned;
    else
      ++local.out_of_frame;
  }
  if (stats) *stats = local;
  return cm;
}

/// Pixel-wise precedence merge of maps of the same wall (multi-station).
inline ConflictMap merge_conflict_maps(const ConflictMap& a, const ConflictMap& b) {
  if (a.grid.width != b.grid.width || a.grid.height != b.grid.height ||
      a.surface_id != b.surface_id)
    throw std::invalid_argument("merge_conflict_maps: incompatible maps");
  ConflictMap out = a;
  for (size_t i = 0; i < out.grid.cells.size(); ++i)
    out.grid.cells[i] = merge_cells(a.grid.cells[i], b.grid.cells[i]);
  return out;
}

inline ConflictMap resample_conflict_map(const ConflictMap& cm, int w, int h) {
  ConflictMap out = cm;
  out.grid = resample_nearest(cm.grid, w, h);
  return out;
}

// ---------------------------------------------------------------------------
// Raster + sidecar I/O
// ---------------------------------------------------------------------------

inline ImageRgb8 export_cm_raster(const ConflictMap& cm) { return cm_to_image(cm.grid); }

/// Sidecar line: surface id, pixel dims, resolution and the four frame
/// corners, full double precision.
inline std::string format_cm_sidecar(const ConflictMap& cm) {
  std::ostringstream os;
  os.precision(17);
  os << cm.surface_id << ' ' << cm.grid.width << ' ' << cm.grid.height << ' ' << cm.resolution;
  for (const Point3* p : {&cm.frame.p1, &cm.frame.p2, &cm.frame.p3, &cm.frame.p4})
    os << ' ' << p->x << ' ' << p->y << ' ' << p->z;
  os << '\n';
  return os.str();
}

struct CmSidecar {
  std::string surface_id;
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  WallFrame frame;
};

inline CmSidecar parse_cm_sidecar(const std::string& line) {
  std::istringstream is(line);
  CmSidecar sc;
  double c[12];
  is >> sc.surface_id >> sc.width >> sc.height >> sc.resolution;
  for (double& v : c) is >> v;
  if (!is) throw std::runtime_error("malformed conflict-map sidecar: " + line);
  sc.frame = WallFrame::from_corners({c[0], c[1], c[2]}, {c[3], c[4], c[5]}, {c[6], c[7], c[8]},
                                     {c[9], c[10], c[11]});
  return sc;
}

inline void write_conflict_map(const std::filesystem::path& png_path, const ConflictMap& cm) {
  write_png_rgb8(png_path, export_cm_raster(cm));
  std::filesystem::path sidecar = png_path;
  sidecar.replace_extension(".frame");
  std::ofstream os(sidecar);
  if (!os) throw std::runtime_error("cannot write " + sidecar.string());
  os << format_cm_sidecar(cm);
}

inline ConflictMap read_conflict_map(const std::filesystem::path& png_path) {
  std::filesystem::path sidecar = png_path;
  sidecar.replace_extension(".frame");
  std::ifstream is(sidecar);
  if (!is) throw std::runtime_error("missing conflict-map sidecar " + sidecar.string());
  std::string line;
  std::getline(is, line);
  CmSidecar sc = parse_cm_sidecar(line);
  ConflictMap cm;
  cm.surface_id = sc.surface_id;
  cm.frame = sc.frame;
  cm.resolution = sc.resolution;
  cm.grid = cm_from_image(read_png_rgb8(png_path));
  if (cm.grid.width != sc.width || cm.grid.height != sc.height)
    throw std::runtime_error("sidecar dimensions disagree with " + png_path.string());
  return cm;
}

}  // namespace lod3kit
