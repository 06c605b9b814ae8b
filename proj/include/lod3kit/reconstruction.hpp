#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lod3kit/citygml.hpp"
#include "lod3kit/geom.hpp"
#include "lod3kit/raster.hpp"
#include "lod3kit/segmentation.hpp"

namespace lod3kit {

/// A detected opening in normalized wall coordinates. `outline`, when
/// non-empty, is a traced polygon refining the rectangle (the
/// no-shape-approximation mode); the rectangle always remains the
/// authoritative footprint for overlap checks.
struct OpeningCandidate {
  OpeningKind kind = OpeningKind::Window;
  Rect2 rect;  // in [0,1]^2, v down
  size_t pixel_count = 0;
  double confidence = 1.0;
  std::vector<Vec2> outline;  // optional, normalized, open (no repeated end)
};

// ---------------------------------------------------------------------------
// Component boundary tracing (for --no-shape-approx)
// ---------------------------------------------------------------------------

namespace detail {

/// Crack-following outline of one labeled 4-connected component: walks
/// pixel-corner lattice edges keeping the component on the right, emitting
/// a vertex at every turn. Returns pixel-unit corner coordinates, or an
/// empty vector if tracing degenerates (caller falls back to the bbox).
inline std::vector<Vec2> trace_component(const Grid<int>& labels, int target,
                                         const ComponentInfo& info) {
  auto inside = [&](int x, int y) {
    return labels.in_bounds(x, y) && labels.at(x, y) == target;
  };
  // start at the top-left corner of the first component pixel in scan order
  int sx = -1, sy = info.min_y;
  for (int x = info.min_x; x <= info.max_x && sx < 0; ++x)
    if (inside(x, info.min_y)) sx = x;
  if (sx < 0) return {};

  // directions: 0=+x, 1=+y, 2=-x, 3=-y; front-left / front-right pixels
  // relative to travel along the crack lattice
  const int dx[4] = {1, 0, -1, 0};
  const int dy[4] = {0, 1, 0, -1};
  auto flank = [](int d, int cx, int cy, bool left) {
    switch (d) {
      case 0: return left ? std::pair{cx, cy - 1} : std::pair{cx, cy};
      case 1: return left ? std::pair{cx, cy} : std::pair{cx - 1, cy};
      case 2: return left ? std::pair{cx - 1, cy} : std::pair{cx - 1, cy - 1};
      default: return left ? std::pair{cx - 1, cy - 1} : std::pair{cx, cy - 1};
    }
  };

  std::vector<Vec2> out;
  int cx = sx, cy = sy, dir = 0;
  const int start_x = cx, start_y = cy, start_dir = dir;
  size_t limit = static_cast<size_t>(labels.width) * labels.height * 4 + 8;
  for (size_t step = 0; step < limit; ++step) {
    auto [flx, fly] = flank(dir, cx, cy, true);
    auto [frx, fry] = flank(dir, cx, cy, false);
    int new_dir = dir;
    if (!inside(frx, fry))
      new_dir = (dir + 1) % 4;  // lost the wall: turn right
    else if (inside(flx, fly))
      new_dir = (dir + 3) % 4;  // inner corner: turn left
    if (new_dir != dir) {
      out.push_back({double(cx), double(cy)});
      dir = new_dir;
    }
    // the lap is complete once the walk re-enters its starting state; test
    // after the turn, or the final corner's turn would start a second lap
    if (step > 0 && cx == start_x && cy == start_y && dir == start_dir) return out;
    cx += dx[dir];
    cy += dy[dir];
  }
  return {};  // never terminated; give up on the outline
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

struct ExtractOptions {
  double min_area_frac = 0.005;
  bool shape_approx = true;  // false traces component outlines
};

/// 4-connected Window/Door components above the area threshold, as
/// normalized bounding rectangles (plus traced outlines when shape
/// approximation is off). Confidence is the mean winning-class
/// probability when `probs` is given, else 1.
inline std::vector<OpeningCandidate> extract_openings(const ClassMap& map, double min_area_frac,
                                                      const ProbabilityRaster* probs = nullptr,
                                                      bool shape_approx = true) {
  if (min_area_frac <= 0.0 || min_area_frac >= 1.0)
    throw std::invalid_argument("min_area_frac must be in (0,1)");
  if (probs && (probs->width != map.width || probs->height != map.height))
    throw std::invalid_argument("probability raster does not match the class map");
  double threshold = min_area_frac * map.width * map.height;
  std::vector<OpeningCandidate> out;
  for (SemClass cls : {SemClass::Window, SemClass::Door}) {
    auto [labels, comps] = label_components(map, [cls](SemClass c) { return c == cls; });
    for (size_t i = 0; i < comps.size(); ++i) {
      const ComponentInfo& c = comps[i];
      if (static_cast<double>(c.count) < threshold) continue;
      OpeningCandidate cand;
      cand.kind = cls == SemClass::Window ? OpeningKind::Window : OpeningKind::Door;
      cand.rect = {double(c.min_x) / map.width, double(c.min_y) / map.height,
                   double(c.max_x + 1) / map.width, double(c.max_y + 1) / map.height};
      cand.pixel_count = c.count;
      if (probs) {
        double sum = 0.0;
        for (int y = c.min_y; y <= c.max_y; ++y)
          for (int x = c.min_x; x <= c.max_x; ++x)
            if (labels.at(x, y) == static_cast<int>(i)) sum += probs->at(cls, x, y);
        cand.confidence = sum / c.count;
      }
      if (!shape_approx) {
        std::vector<Vec2> corners = detail::trace_component(labels, static_cast<int>(i), c);
        cand.outline.reserve(corners.size());
        for (const auto& p : corners)
          cand.outline.push_back({p.x / map.width, p.y / map.height});
      }
      out.push_back(std::move(cand));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conditioning
// ---------------------------------------------------------------------------

/// Prepares raw candidates for insertion: every rectangle shrinks by half
/// a pixel per side (so neighboring detections cannot share ring
/// segments), gets clamped one pixel inside the wall boundary, and door
/// bottoms within two pixels of the wall bottom snap onto the bottom
/// interior margin. Degenerate results are dropped.
inline std::vector<OpeningCandidate> condition_candidates(std::vector<OpeningCandidate> cands,
                                                          int map_w, int map_h) {
  double px = 1.0 / map_w, py = 1.0 / map_h;
  std::vector<OpeningCandidate> out;
  for (OpeningCandidate& c : cands) {
    Rect2& r = c.rect;
    r = {r.x_min + 0.5 * px, r.y_min + 0.5 * py, r.x_max - 0.5 * px, r.y_max - 0.5 * py};
    r.x_min = std::max(r.x_min, px);
    r.y_min = std::max(r.y_min, py);
    r.x_max = std::min(r.x_max, 1.0 - px);
    r.y_max = std::min(r.y_max, 1.0 - py);
    if (c.kind == OpeningKind::Door && r.y_max >= 1.0 - 2.0 * py) r.y_max = 1.0 - py;
    if (r.x_max - r.x_min < 0.25 * px || r.y_max - r.y_min < 0.25 * py) continue;
    // outlines only need the wall-boundary clamp; overlap handling falls
    // back to the rectangle at insertion time
    for (Vec2& p : c.outline) {
      p.x = std::clamp(p.x, px, 1.0 - px);
      p.y = std::clamp(p.y, py, 1.0 - py);
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// 2D -> 3D lifting and insertion
// ---------------------------------------------------------------------------

/// Bilinear lift of one normalized wall coordinate.
inline Point3 map_2d_to_3d(double u, double v, const WallFrame& frame) {
  return frame.map(u, v);
}

namespace detail {

inline LinearRing lift_ring(const std::vector<Vec2>& uv_open, const WallFrame& frame) {
  LinearRing ring;
  ring.vertices.reserve(uv_open.size() + 1);
  for (const auto& p : uv_open) ring.vertices.push_back(frame.map(p.x, p.y));
  ring.vertices.push_back(ring.vertices.front());
  return ring;
}

inline std::vector<Vec2> rect_ring_uv(const Rect2& r) {
  return {{r.x_min, r.y_min}, {r.x_max, r.y_min}, {r.x_max, r.y_max}, {r.x_min, r.y_max}};
}

/// A usable outline must be a simple polygon with nonzero area that stays
/// inside its candidate's rectangle neighborhood and clear of every other
/// candidate's rectangle.
inline bool outline_usable(const std::vector<Vec2>& outline, size_t self,
                           const std::vector<OpeningCandidate>& all) {
  if (outline.size() < 4) return false;
  for (size_t i = 0; i + 1 < outline.size(); ++i)
    if (outline[i] == outline[i + 1]) return false;
  if (outline.front() == outline.back()) return false;
  if (std::abs(signed_area(outline)) < 1e-12) return false;
  if (ring_self_intersects(outline)) return false;
  for (size_t j = 0; j < all.size(); ++j) {
    if (j == self) continue;
    const Rect2& r = all[j].rect;
    std::vector<Vec2> other = rect_ring_uv(r);
    size_t n = outline.size();
    for (size_t a = 0; a < n; ++a)
      for (size_t b = 0; b < 4; ++b)
        if (segments_intersect(outline[a], outline[(a + 1) % n], other[b], other[(b + 1) % 4]))
          return false;
    for (const auto& p : outline)
      if (r.contains(p.x, p.y)) return false;
  }
  return true;
}

}  // namespace detail

/// Inserts candidates into a wall: each one becomes an interior ring of
/// the wall polygon (wound opposite to the exterior) plus a semantic
/// Window/Door opening with identical geometry. Candidates must be
/// pairwise disjoint and strictly inside the open unit square; the
/// returned wall passes validation.
inline WallSurface insert_openings(const WallSurface& ws,
                                   const std::vector<OpeningCandidate>& cands,
                                   const WallFrame& frame) {
  for (size_t i = 0; i < cands.size(); ++i) {
    const Rect2& r = cands[i].rect;
    if (!(r.x_min > 0.0 && r.y_min > 0.0 && r.x_max < 1.0 && r.y_max < 1.0))
      throw CityGmlError("candidate " + std::to_string(i) + " on wall " + ws.id +
                         " touches the exterior boundary");
    for (size_t j = i + 1; j < cands.size(); ++j) {
      const Rect2& o = cands[j].rect;
      bool separated = r.x_max <= o.x_min || o.x_max <= r.x_min || r.y_max <= o.y_min ||
                       o.y_max <= r.y_min;
      if (!separated)
        throw CityGmlError("candidates " + std::to_string(i) + " and " + std::to_string(j) +
                           " on wall " + ws.id + " overlap");
    }
  }

  // exterior winding in the wall plane, to oppose
  std::vector<Point3> ext_pts = ws.exterior.open_vertices();
  PlaneFit plane = fit_plane(ext_pts);
  auto [e1, e2] = plane_basis(plane.normal);
  double ext_area = signed_area(project_to_plane(ext_pts, plane.centroid, e1, e2));

  WallSurface out = ws;
  int counter = 0;
  for (size_t i = 0; i < cands.size(); ++i) {
    const OpeningCandidate& c = cands[i];
    std::vector<Vec2> uv = !c.outline.empty() && detail::outline_usable(c.outline, i, cands)
                               ? c.outline
                               : detail::rect_ring_uv(c.rect);
    LinearRing ring = detail::lift_ring(uv, frame);
    std::vector<Point3> ring_open = ring.open_vertices();
    double ring_area = signed_area(project_to_plane(ring_open, plane.centroid, e1, e2));
    if (ring_area * ext_area > 0.0)
      std::reverse(ring.vertices.begin(), ring.vertices.end());
    Opening op;
    op.kind = c.kind;
    op.id = out.id + (c.kind == OpeningKind::Window ? "_window" : "_door") +
            std::to_string(counter++);
    op.ring = ring;
    out.interiors.push_back(ring);
    out.openings.push_back(std::move(op));
  }

  std::vector<Violation> violations;
  detail::validate_wall(out, violations);
  if (!violations.empty()) {
    std::ostringstream os;
    os << "wall " << ws.id << " invalid after insertion:";
    for (const auto& v : violations) os << ' ' << v.kind << " (" << v.detail << ')';
    throw CityGmlError(os.str());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole-model reconstruction
// ---------------------------------------------------------------------------

struct ReconstructOptions {
  double min_area_frac = 0.005;
  bool shape_approx = true;
};

/// One line of the per-wall outcome report.
struct WallOutcome {
  std::string surface_id;
  bool ok = true;
  size_t inserted = 0;
  std::string message;
};

/// Lifts per-wall class maps into a LoD3 model. Walls whose insertion
/// fails are rolled back (left at LoD2 geometry) and reported; everything
/// else proceeds. The returned model always passes validation. Walls listed
/// in `frames` use that pixel-to-wall mapping (from a raster sidecar);
/// everyone else gets the frame derived from their own corners.
inline CityModel reconstruct_lod3(const CityModel& input,
                                  const std::map<std::string, ClassMap>& classmaps,
                                  const std::map<std::string, ProbabilityRaster>& probs,
                                  const ReconstructOptions& opt,
                                  std::vector<WallOutcome>* outcomes = nullptr,
                                  const std::map<std::string, WallFrame>& frames = {}) {
  ValidationReport pre = validate_geometry(input);
  if (!pre.ok())
    throw CityGmlError("reconstruct: input model invalid:\n" + pre.to_text());
  for (const auto* b : input.buildings())
    if (b->lod == Lod::LoD3)
      throw CityGmlError("reconstruct: building " + b->id + " is already LoD3");

  CityModel model = input;
  std::vector<WallOutcome> local;
  std::map<std::string, WallSurface*> by_id;
  for (auto* b : model.buildings())
    for (auto* ws : b->walls()) by_id.emplace(ws->id, ws);
  for (const auto& [id, map] : classmaps) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw CityGmlError("class map keyed to unknown surface '" + id + "'");
    WallSurface* ws = it->second;
    WallOutcome outcome;
    outcome.surface_id = id;
    try {
      const ProbabilityRaster* p = nullptr;
      if (auto pit = probs.find(id); pit != probs.end()) p = &pit->second;
      std::vector<OpeningCandidate> cands =
          extract_openings(map, opt.min_area_frac, p, opt.shape_approx);
      cands = condition_candidates(cands, map.width, map.height);
      WallFrame fr = wall_frame(*ws);
      if (auto fit = frames.find(id); fit != frames.end()) fr = fit->second;
      WallSurface inserted = insert_openings(*ws, cands, fr);
      outcome.inserted = inserted.openings.size();
      *ws = std::move(inserted);
    } catch (const std::exception& e) {
      outcome.ok = false;
      outcome.message = e.what();
    }
    local.push_back(std::move(outcome));
  }
  for (auto* b : model.buildings()) b->lod = Lod::LoD3;
  if (outcomes) *outcomes = std::move(local);
  return model;
}

}  // namespace lod3kit
