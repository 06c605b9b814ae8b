#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lod3kit/geom.hpp"
#include "lod3kit/xml.hpp"

namespace lod3kit {

enum class OpeningKind : int { Window, Door };
enum class Lod : int { LoD2 = 2, LoD3 = 3 };

inline const char* opening_element_name(OpeningKind k) {
  return k == OpeningKind::Window ? "bldg:Window" : "bldg:Door";
}

/// Explicitly closed ring: first vertex repeated as the last.
struct LinearRing {
  std::vector<Point3> vertices;
  bool operator==(const LinearRing&) const = default;

  bool closed() const {
    return vertices.size() >= 2 && vertices.front() == vertices.back();
  }
  /// Vertices without the closing duplicate (only valid on closed rings).
  std::vector<Point3> open_vertices() const {
    if (closed()) return {vertices.begin(), vertices.end() - 1};
    return vertices;
  }
};

struct Opening {
  OpeningKind kind = OpeningKind::Window;
  std::string id;
  LinearRing ring;
  bool operator==(const Opening&) const = default;
};

struct WallSurface {
  std::string id;
  LinearRing exterior;
  std::vector<LinearRing> interiors;
  std::array<Point3, 4> corners{};  // P1 top-left, P2 top-right, P3 bottom-left, P4 bottom-right
  std::vector<Opening> openings;
  bool operator==(const WallSurface&) const = default;
};

/// One child element of a Building, in document order. Wall surfaces are
/// modeled; everything else (roof/ground surfaces, measured height, ...)
/// is carried as a verbatim byte slice.
struct BuildingMember {
  bool is_wall = false;
  WallSurface wall;
  std::string raw;
  bool operator==(const BuildingMember&) const = default;
};

struct Building {
  std::string id;
  Lod lod = Lod::LoD2;
  std::vector<BuildingMember> members;
  bool operator==(const Building&) const = default;

  std::vector<WallSurface*> walls() {
    std::vector<WallSurface*> out;
    for (auto& m : members)
      if (m.is_wall) out.push_back(&m.wall);
    return out;
  }
  std::vector<const WallSurface*> walls() const {
    std::vector<const WallSurface*> out;
    for (const auto& m : members)
      if (m.is_wall) out.push_back(&m.wall);
    return out;
  }
};

/// One child element of the CityModel root, in document order.
struct CityMember {
  bool is_building = false;
  Building building;
  std::string raw;
  bool operator==(const CityMember&) const = default;
};

struct CityModel {
  std::vector<CityMember> members;
  bool operator==(const CityModel&) const = default;

  std::vector<Building*> buildings() {
    std::vector<Building*> out;
    for (auto& m : members)
      if (m.is_building) out.push_back(&m.building);
    return out;
  }
  std::vector<const Building*> buildings() const {
    std::vector<const Building*> out;
    for (const auto& m : members)
      if (m.is_building) out.push_back(&m.building);
    return out;
  }
};

struct CityGmlError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string surface_id;
  std::string kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_text() const {
    std::ostringstream os;
    for (const auto& v : violations)
      os << v.surface_id << ' ' << v.kind << ' ' << v.detail << '\n';
    return os.str();
  }
};

inline constexpr double kPlaneTolerance = 1e-3;  // meters, max vertex-to-plane distance

namespace detail {

inline bool rings_touch_2d(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  size_t na = a.size(), nb = b.size();
  for (size_t i = 0; i < na; ++i)
    for (size_t j = 0; j < nb; ++j)
      if (segments_intersect(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb])) return true;
  return false;
}

inline void validate_wall(const WallSurface& ws, std::vector<Violation>& out) {
  auto add = [&](const std::string& kind, const std::string& detail) {
    out.push_back({ws.id, kind, detail});
  };

  // Per-ring basics, for the exterior, interiors and opening rings alike.
  struct NamedRing {
    std::string label;
    const LinearRing* ring;
  };
  std::vector<NamedRing> rings;
  rings.push_back({"exterior", &ws.exterior});
  for (size_t i = 0; i < ws.interiors.size(); ++i)
    rings.push_back({"interior#" + std::to_string(i), &ws.interiors[i]});
  for (size_t i = 0; i < ws.openings.size(); ++i)
    rings.push_back({"opening#" + std::to_string(i), &ws.openings[i].ring});

  bool basics_ok = true;
  for (const auto& [label, ring] : rings) {
    const auto& v = ring->vertices;
    for (const auto& p : v)
      if (!finite(p)) {
        add("non-finite", label + " has a non-finite coordinate");
        basics_ok = false;
      }
    if (v.size() < 4) {
      add("too-few-points", label + " has " + std::to_string(v.size()) + " vertices");
      basics_ok = false;
      continue;
    }
    if (!(v.front() == v.back())) {
      add("open-ring", label + " first vertex does not repeat as last");
      basics_ok = false;
    }
    for (size_t i = 0; i + 1 < v.size(); ++i)
      if (v[i] == v[i + 1]) {
        add("duplicate-vertex", label + " repeats vertex " + std::to_string(i));
        basics_ok = false;
      }
  }
  if (!basics_ok) return;  // geometry predicates below assume closed sane rings

  // Common plane over every vertex of every ring.
  std::vector<Point3> all_pts;
  for (const auto& [label, ring] : rings)
    for (const auto& p : ring->open_vertices()) all_pts.push_back(p);
  PlaneFit plane = fit_plane(all_pts);
  if (plane.max_dev > kPlaneTolerance) {
    std::ostringstream os;
    os << "max plane deviation " << plane.max_dev << " m";
    add("non-planar", os.str());
    return;
  }
  auto [e1, e2] = plane_basis(plane.normal);

  std::vector<std::vector<Vec2>> flat;  // projected open rings, same order as `rings`
  for (const auto& [label, ring] : rings)
    flat.push_back(project_to_plane(ring->open_vertices(), plane.centroid, e1, e2));

  for (size_t r = 0; r < rings.size(); ++r)
    if (ring_self_intersects(flat[r]))
      add("self-intersection", rings[r].label + " crosses itself");

  const auto& ext2 = flat[0];
  double ext_area = signed_area(ext2);
  if (std::abs(ext_area) < 1e-12) {
    add("degenerate", "exterior ring has zero area");
    return;
  }

  size_t n_int = ws.interiors.size();
  for (size_t i = 0; i < n_int; ++i) {
    const auto& label = rings[1 + i].label;
    const auto& ring2 = flat[1 + i];
    bool inside = true;
    for (const auto& q : ring2)
      if (!point_in_polygon(q, ext2)) inside = false;
    if (!inside || rings_touch_2d(ring2, ext2))
      add("interior-outside", label + " not strictly inside the exterior ring");
    if (signed_area(ring2) * ext_area > 0.0)
      add("winding", label + " wound the same way as the exterior ring");
    for (size_t j = i + 1; j < n_int; ++j) {
      const auto& other = flat[1 + j];
      bool overlap = rings_touch_2d(ring2, other);
      if (!overlap && point_in_polygon(other[0], ring2)) overlap = true;
      if (!overlap && point_in_polygon(ring2[0], other)) overlap = true;
      if (overlap)
        add("interior-overlap", label + " overlaps " + rings[1 + j].label);
    }
  }

  // Dual representation: every opening ring appears exactly once among
  // the interiors, vertex-for-vertex.
  std::vector<bool> claimed(n_int, false);
  for (size_t o = 0; o < ws.openings.size(); ++o) {
    int found = -1;
    for (size_t i = 0; i < n_int; ++i) {
      if (!claimed[i] && ws.interiors[i] == ws.openings[o].ring) {
        found = static_cast<int>(i);
        break;
      }
    }
    if (found < 0)
      add("opening-ring-missing",
          rings[1 + n_int + o].label + " has no matching interior ring");
    else
      claimed[found] = true;
  }
}

}  // namespace detail

/// Checks every structural invariant and reports violations as data; never
/// throws. An empty report means the model is valid.
inline ValidationReport validate_geometry(const CityModel& model) {
  ValidationReport report;
  for (const auto* b : model.buildings()) {
    std::vector<std::string> seen_ids;
    for (const auto* ws : b->walls()) {
      if (std::find(seen_ids.begin(), seen_ids.end(), ws->id) != seen_ids.end())
        report.violations.push_back({ws->id, "duplicate-id", "surface id reused in " + b->id});
      seen_ids.push_back(ws->id);
      detail::validate_wall(*ws, report.violations);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Wall frame derivation
// ---------------------------------------------------------------------------

/// Derives the four frame corners from an exterior ring: the minimal
/// oriented rectangle of the ring in its fitted plane. The corner order
/// puts P1 top-left, P2 top-right, P3 bottom-left, P4 bottom-right with
/// "down" chosen as the more vertical rectangle axis pointing towards
/// negative z (image rows grow towards the wall bottom).
inline std::array<Point3, 4> derive_corners(const LinearRing& exterior) {
  std::vector<Point3> pts = exterior.open_vertices();
  if (pts.size() < 3) throw CityGmlError("cannot derive corners from a ring with < 3 vertices");
  PlaneFit plane = fit_plane(pts);
  auto [e1, e2] = plane_basis(plane.normal);
  std::vector<Vec2> flat = project_to_plane(pts, plane.centroid, e1, e2);
  OrientedRect rect = min_oriented_rect(flat);

  auto lift_dir = [&](Vec2 d) { return e1 * d.x + e2 * d.y; };
  Vec3 axis_a = lift_dir(rect.axis_u);
  Vec3 axis_b = lift_dir(rect.axis_v);
  double ext_a = rect.u_max - rect.u_min;
  double ext_b = rect.v_max - rect.v_min;
  Point3 center = plane.centroid +
                  lift_dir(rect.axis_u * ((rect.u_min + rect.u_max) * 0.5) +
                           rect.axis_v * ((rect.v_min + rect.v_max) * 0.5));

  // The more vertical axis becomes v (rows); ties go to axis_b.
  Vec3 udir = axis_a, vdir = axis_b;
  double eu = ext_a, ev = ext_b;
  if (std::abs(axis_a.z) > std::abs(axis_b.z)) {
    std::swap(udir, vdir);
    std::swap(eu, ev);
  }
  // v points down; break exact-horizontal ties on -y then -x.
  bool flip = vdir.z > 0.0 ||
              (vdir.z == 0.0 && (vdir.y > 0.0 || (vdir.y == 0.0 && vdir.x > 0.0)));
  if (flip) vdir = vdir * -1.0;
  // u sign fixed against the ring's own orientation so the frame is a
  // deterministic function of the ring.
  if (dot(cross(udir, vdir), newell_normal(pts)) < 0.0) udir = udir * -1.0;

  std::array<Point3, 4> corners;
  corners[0] = center - udir * (eu * 0.5) - vdir * (ev * 0.5);  // P1 top-left
  corners[1] = corners[0] + udir * eu;                          // P2 top-right
  corners[2] = corners[0] + vdir * ev;                          // P3 bottom-left
  corners[3] = corners[2] + udir * eu;                          // P4 bottom-right
  return corners;
}

/// The (u,v) in [0,1]^2 frame over a wall's corners; u runs P1->P2, v runs
/// P1->P3 with metric extents in meters.
inline WallFrame wall_frame(const WallSurface& ws) {
  return WallFrame::from_corners(ws.corners[0], ws.corners[1], ws.corners[2], ws.corners[3]);
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void gml_fail(const std::string& path, const std::string& what) {
  throw CityGmlError("at " + path + ": " + what);
}

inline std::vector<Point3> parse_pos_list(const XmlNode& ring_el, const std::string& path) {
  std::string text;
  if (const XmlNode* pl = ring_el.child("posList")) {
    text = pl->text;
  } else {
    for (const XmlNode* pos : ring_el.all("pos")) text += pos->text + " ";
    if (text.empty()) gml_fail(path, "LinearRing has neither gml:posList nor gml:pos");
  }
  std::istringstream is(text);
  std::vector<double> nums;
  std::string tok;
  while (is >> tok) {
    try {
      size_t used = 0;
      double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      nums.push_back(v);
    } catch (const std::exception&) {
      gml_fail(path, "non-numeric coordinate '" + tok + "'");
    }
  }
  if (nums.empty() || nums.size() % 3 != 0)
    gml_fail(path, "coordinate count " + std::to_string(nums.size()) +
                       " is not a positive multiple of 3");
  std::vector<Point3> pts;
  for (size_t i = 0; i < nums.size(); i += 3) pts.push_back({nums[i], nums[i + 1], nums[i + 2]});
  if (pts.size() < 4)
    gml_fail(path, "ring has only " + std::to_string(pts.size()) + " points (need >= 4, closed)");
  return pts;
}

inline LinearRing parse_ring(const XmlNode& parent, const std::string& path) {
  const XmlNode* ring = parent.child("LinearRing");
  if (!ring) gml_fail(path, "expected a gml:LinearRing");
  return LinearRing{parse_pos_list(*ring, path + "/" + ring->name)};
}

// Walks lodNMultiSurface -> MultiSurface -> surfaceMember -> Polygon and
// returns the polygon node; the subset supports exactly one polygon.
inline const XmlNode* find_polygon(const XmlNode& surface_el, const std::string& path,
                                   int* lod_out) {
  const XmlNode* lod_ms = nullptr;
  for (const auto& c : surface_el.children) {
    std::string_view local = xml_local_name(c.name);
    if (local == "lod2MultiSurface" || local == "lod3MultiSurface") {
      if (lod_ms) gml_fail(path, "multiple lod multi-surfaces");
      lod_ms = &c;
      if (lod_out) *lod_out = local == "lod3MultiSurface" ? 3 : 2;
    }
  }
  if (!lod_ms) gml_fail(path, "no lod2MultiSurface/lod3MultiSurface child");
  const XmlNode* ms = lod_ms->child("MultiSurface");
  if (!ms) gml_fail(path, "no gml:MultiSurface");
  auto members = ms->all("surfaceMember");
  if (members.size() != 1)
    gml_fail(path, "expected exactly 1 gml:surfaceMember, found " +
                       std::to_string(members.size()));
  const XmlNode* poly = members[0]->child("Polygon");
  if (!poly) gml_fail(path, "surfaceMember without gml:Polygon");
  return poly;
}

inline WallSurface parse_wall(const XmlNode& wall_el, const std::string& building_path,
                              int* lod_out) {
  WallSurface ws;
  if (const std::string* id = wall_el.attr("id"))
    ws.id = *id;
  else
    gml_fail(building_path + "/" + wall_el.name, "WallSurface without gml:id");
  std::string path = building_path + "/" + wall_el.name + "[" + ws.id + "]";

  const XmlNode* poly = find_polygon(wall_el, path, lod_out);
  const XmlNode* ext = poly->child("exterior");
  if (!ext) gml_fail(path, "polygon without gml:exterior");
  ws.exterior = parse_ring(*ext, path + "/gml:exterior");
  for (const XmlNode* inner : poly->all("interior"))
    ws.interiors.push_back(parse_ring(*inner, path + "/gml:interior"));

  int opening_ix = 0;
  for (const XmlNode* op_el : wall_el.all("opening")) {
    for (const auto& c : op_el->children) {
      std::string_view local = xml_local_name(c.name);
      if (local != "Window" && local != "Door")
        gml_fail(path, "unsupported opening element " + c.name);
      Opening op;
      op.kind = local == "Window" ? OpeningKind::Window : OpeningKind::Door;
      if (const std::string* id = c.attr("id"))
        op.id = *id;
      else
        op.id = ws.id + "_o" + std::to_string(opening_ix);
      const XmlNode* op_poly = find_polygon(c, path + "/" + c.name, nullptr);
      const XmlNode* op_ext = op_poly->child("exterior");
      if (!op_ext) gml_fail(path + "/" + c.name, "opening polygon without gml:exterior");
      op.ring = parse_ring(*op_ext, path + "/" + c.name);
      ws.openings.push_back(std::move(op));
      ++opening_ix;
    }
  }
  ws.corners = derive_corners(ws.exterior);
  return ws;
}

inline Building parse_building(const XmlNode& b_el, std::string_view source,
                               const std::string& model_path) {
  Building b;
  if (const std::string* id = b_el.attr("id"))
    b.id = *id;
  else
    gml_fail(model_path + "/" + b_el.name, "Building without gml:id");
  std::string path = model_path + "/" + b_el.name + "[" + b.id + "]";

  int max_lod = 2;
  for (const auto& child : b_el.children) {
    const XmlNode* wall_el = nullptr;
    if (xml_local_name(child.name) == "boundedBy")
      for (const auto& inner : child.children)
        if (xml_local_name(inner.name) == "WallSurface") wall_el = &inner;
    if (wall_el) {
      BuildingMember m;
      m.is_wall = true;
      int lod = 2;
      m.wall = parse_wall(*wall_el, path, &lod);
      max_lod = std::max(max_lod, lod);
      if (!m.wall.openings.empty()) max_lod = 3;
      b.members.push_back(std::move(m));
    } else {
      BuildingMember m;
      m.raw = std::string(source.substr(child.src_begin, child.src_end - child.src_begin));
      b.members.push_back(std::move(m));
    }
  }
  b.lod = max_lod >= 3 ? Lod::LoD3 : Lod::LoD2;
  return b;
}

}  // namespace detail

inline CityModel parse_citygml(std::string_view source) {
  XmlNode root = xml_parse(source);
  if (xml_local_name(root.name) != "CityModel")
    throw CityGmlError("root element is " + root.name + ", expected CityModel");
  std::string path = "/" + root.name;
  CityModel model;
  for (const auto& child : root.children) {
    const XmlNode* b_el = nullptr;
    if (xml_local_name(child.name) == "cityObjectMember")
      for (const auto& inner : child.children)
        if (xml_local_name(inner.name) == "Building") b_el = &inner;
    CityMember m;
    if (b_el) {
      m.is_building = true;
      m.building = detail::parse_building(*b_el, source, path);
    } else {
      m.raw = std::string(source.substr(child.src_begin, child.src_end - child.src_begin));
    }
    model.members.push_back(std::move(m));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_coord(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string format_ring(const LinearRing& ring) {
  std::string out;
  for (size_t i = 0; i < ring.vertices.size(); ++i) {
    const Point3& p = ring.vertices[i];
    if (i) out += ' ';
    out += format_coord(p.x) + ' ' + format_coord(p.y) + ' ' + format_coord(p.z);
  }
  return out;
}

inline XmlNode ring_node(const char* role, const LinearRing& ring) {
  XmlNode pos{"gml:posList"};
  pos.attrs.emplace_back("srsDimension", "3");
  pos.text = format_ring(ring);
  XmlNode lr{"gml:LinearRing"};
  lr.children.push_back(std::move(pos));
  XmlNode wrap{role};
  wrap.children.push_back(std::move(lr));
  return wrap;
}

inline XmlNode polygon_node(const LinearRing& exterior, const std::vector<LinearRing>& interiors) {
  XmlNode poly{"gml:Polygon"};
  poly.children.push_back(ring_node("gml:exterior", exterior));
  for (const auto& inner : interiors) poly.children.push_back(ring_node("gml:interior", inner));
  XmlNode member{"gml:surfaceMember"};
  member.children.push_back(std::move(poly));
  XmlNode ms{"gml:MultiSurface"};
  ms.children.push_back(std::move(member));
  return ms;
}

inline XmlNode wall_node(const WallSurface& ws, Lod lod) {
  XmlNode wall{"bldg:WallSurface"};
  wall.attrs.emplace_back("gml:id", ws.id);
  XmlNode lod_ms{lod == Lod::LoD3 ? "bldg:lod3MultiSurface" : "bldg:lod2MultiSurface"};
  lod_ms.children.push_back(polygon_node(ws.exterior, ws.interiors));
  wall.children.push_back(std::move(lod_ms));
  for (const auto& op : ws.openings) {
    XmlNode op_el{opening_element_name(op.kind)};
    op_el.attrs.emplace_back("gml:id", op.id);
    XmlNode op_lod{"bldg:lod3MultiSurface"};
    op_lod.children.push_back(polygon_node(op.ring, {}));
    op_el.children.push_back(std::move(op_lod));
    XmlNode wrap{"bldg:opening"};
    wrap.children.push_back(std::move(op_el));
    wall.children.push_back(std::move(wrap));
  }
  XmlNode bounded{"bldg:boundedBy"};
  bounded.children.push_back(std::move(wall));
  return bounded;
}

}  // namespace detail

/// Serializes with canonical core/bldg/gml prefixes and millimeter
/// coordinate precision. The model must be valid; violations are an error
/// here (validate_geometry reports them as data instead).
inline std::string serialize_citygml(const CityModel& model) {
  ValidationReport report = validate_geometry(model);
  if (!report.ok()) {
    std::string msg = "refusing to serialize an invalid model:\n" + report.to_text();
    throw CityGmlError(msg);
  }
  XmlNode root{"core:CityModel"};
  root.attrs.emplace_back("xmlns:core", "http://www.opengis.net/citygml/2.0");
  root.attrs.emplace_back("xmlns:bldg", "http://www.opengis.net/citygml/building/2.0");
  root.attrs.emplace_back("xmlns:gml", "http://www.opengis.net/gml");
  for (const auto& m : model.members) {
    if (!m.is_building) {
      XmlNode raw;
      raw.raw = m.raw;
      root.children.push_back(std::move(raw));
      continue;
    }
    XmlNode b_el{"bldg:Building"};
    b_el.attrs.emplace_back("gml:id", m.building.id);
    for (const auto& member : m.building.members) {
      if (member.is_wall) {
        b_el.children.push_back(detail::wall_node(member.wall, m.building.lod));
      } else {
        XmlNode raw;
        raw.raw = member.raw;
        b_el.children.push_back(std::move(raw));
      }
    }
    XmlNode com{"core:cityObjectMember"};
    com.children.push_back(std::move(b_el));
    root.children.push_back(std::move(com));
  }
  return xml_write(root);
}

// ---------------------------------------------------------------------------
// Model helpers
// ---------------------------------------------------------------------------

/// Rounds every stored coordinate to millimeters, the serialization
/// precision; parse(serialize(m)) == m holds exactly for quantized models.
inline void quantize_model_mm(CityModel& model) {
  auto q = [](double v) { return std::round(v * 1000.0) / 1000.0; };
  auto q_ring = [&](LinearRing& r) {
    for (auto& p : r.vertices) p = {q(p.x), q(p.y), q(p.z)};
  };
  for (auto* b : model.buildings())
    for (auto* ws : b->walls()) {
      q_ring(ws->exterior);
      for (auto& r : ws->interiors) q_ring(r);
      for (auto& o : ws->openings) q_ring(o.ring);
      ws->corners = derive_corners(ws->exterior);
    }
}

/// Structural equality up to a coordinate tolerance: ids, kinds, member
/// kinds/order, raw passthrough bytes, and every ring vertex within tol.
inline bool models_equal(const CityModel& a, const CityModel& b, double tol = 1e-9) {
  auto ring_eq = [&](const LinearRing& x, const LinearRing& y) {
    if (x.vertices.size() != y.vertices.size()) return false;
    for (size_t i = 0; i < x.vertices.size(); ++i)
      if (distance(x.vertices[i], y.vertices[i]) > tol) return false;
    return true;
  };
  if (a.members.size() != b.members.size()) return false;
  for (size_t i = 0; i < a.members.size(); ++i) {
    const auto& ma = a.members[i];
    const auto& mb = b.members[i];
    if (ma.is_building != mb.is_building) return false;
    if (!ma.is_building) {
      if (ma.raw != mb.raw) return false;
      continue;
    }
    const Building& ba = ma.building;
    const Building& bb = mb.building;
    if (ba.id != bb.id || ba.lod != bb.lod || ba.members.size() != bb.members.size()) return false;
    for (size_t j = 0; j < ba.members.size(); ++j) {
      const auto& wa = ba.members[j];
      const auto& wb = bb.members[j];
      if (wa.is_wall != wb.is_wall) return false;
      if (!wa.is_wall) {
        if (wa.raw != wb.raw) return false;
        continue;
      }
      if (wa.wall.id != wb.wall.id) return false;
      if (!ring_eq(wa.wall.exterior, wb.wall.exterior)) return false;
      if (wa.wall.interiors.size() != wb.wall.interiors.size()) return false;
      for (size_t k = 0; k < wa.wall.interiors.size(); ++k)
        if (!ring_eq(wa.wall.interiors[k], wb.wall.interiors[k])) return false;
      if (wa.wall.openings.size() != wb.wall.openings.size()) return false;
      for (size_t k = 0; k < wa.wall.openings.size(); ++k) {
        const Opening& oa = wa.wall.openings[k];
        const Opening& ob = wb.wall.openings[k];
        if (oa.kind != ob.kind || oa.id != ob.id || !ring_eq(oa.ring, ob.ring)) return false;
      }
    }
  }
  return true;
}

}  // namespace lod3kit
