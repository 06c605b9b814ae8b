#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace lod3kit {

// ---------------------------------------------------------------------------
// 3D vectors / points (meters, projected Cartesian CRS)
// ---------------------------------------------------------------------------

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

using Point3 = Vec3;

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
  double n = norm(v);
  if (n == 0.0) throw std::invalid_argument("cannot normalize zero vector");
  return v / n;
}

inline bool finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

// ---------------------------------------------------------------------------
// 2D helpers (wall-plane projections, rasters)
// ---------------------------------------------------------------------------

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& v) { return std::sqrt(dot(v, v)); }

/// Axis-aligned rectangle; ranges are half-open in raster contexts but
/// closed for geometric containment tests.
struct Rect2 {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool contains(double px, double py) const {
    return px >= x_min && px < x_max && py >= y_min && py < y_max;
  }
  bool intersects(const Rect2& o) const {
    return x_min < o.x_max && o.x_min < x_max && y_min < o.y_max && o.y_min < y_max;
  }
};

inline double rect_intersection_area(const Rect2& a, const Rect2& b) {
  double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

inline double rect_iou(const Rect2& a, const Rect2& b) {
  double inter = rect_intersection_area(a, b);
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Shoelace signed area. Accepts open or explicitly closed vertex lists.
inline double signed_area(std::span<const Vec2> ring) {
  size_t n = ring.size();
  if (n >= 2 && ring.front() == ring.back()) n -= 1;
  if (n < 3) return 0.0;
  double a = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Vec2& p = ring[i];
    const Vec2& q = ring[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

/// Even-odd crossing test. Points exactly on an edge are not guaranteed
/// either way; callers that care use strict containment with margins.
inline bool point_in_polygon(const Vec2& p, std::span<const Vec2> ring) {
  size_t n = ring.size();
  if (n >= 2 && ring.front() == ring.back()) n -= 1;
  bool inside = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

namespace detail {
inline int orient_sign(const Vec2& a, const Vec2& b, const Vec2& c) {
  double v = cross(b - a, c - a);
  if (v > 0) return 1;
  if (v < 0) return -1;
  return 0;
}
inline bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}
}  // namespace detail

/// True when segments [a,b] and [c,d] share at least one point.
inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  int d1 = detail::orient_sign(a, b, c);
  int d2 = detail::orient_sign(a, b, d);
  int d3 = detail::orient_sign(c, d, a);
  int d4 = detail::orient_sign(c, d, b);
  if (d1 != d2 && d3 != d4) return true;
  if (d1 == 0 && detail::on_segment(a, b, c)) return true;
  if (d2 == 0 && detail::on_segment(a, b, d)) return true;
  if (d3 == 0 && detail::on_segment(c, d, a)) return true;
  if (d4 == 0 && detail::on_segment(c, d, b)) return true;
  return false;
}

/// Self-intersection over non-adjacent edge pairs of a closed ring.
/// Shared endpoints of adjacent edges do not count.
inline bool ring_self_intersects(std::span<const Vec2> ring) {
  size_t n = ring.size();
  if (n >= 2 && ring.front() == ring.back()) n -= 1;
  if (n < 4) return false;
  for (size_t i = 0; i < n; ++i) {
    size_t i2 = (i + 1) % n;
    for (size_t j = i + 1; j < n; ++j) {
      size_t j2 = (j + 1) % n;
      if (j == i || j2 == i || j == i2) continue;  // adjacent or same edge
      if (segments_intersect(ring[i], ring[i2], ring[j], ring[j2])) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Plane fitting
// ---------------------------------------------------------------------------

struct PlaneFit {
  Vec3 centroid;
  Vec3 normal;      // unit
  double max_dev;   // max |distance| of the input points to the plane
};

namespace detail {

/// Jacobi eigen decomposition of a symmetric 3x3 matrix. Returns
/// eigenvalues (ascending) and matching unit eigenvectors as columns.
inline void sym3_eigen(const std::array<std::array<double, 3>, 3>& m_in,
                       std::array<double, 3>& eval,
                       std::array<Vec3, 3>& evec) {
  std::array<std::array<double, 3>, 3> a = m_in;
  std::array<std::array<double, 3>, 3> v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    if (off < 1e-300) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < 3; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::array<int, 3> order{0, 1, 2};
  std::array<double, 3> d{a[0][0], a[1][1], a[2][2]};
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (d[order[j]] < d[order[i]]) std::swap(order[i], order[j]);
  for (int i = 0; i < 3; ++i) {
    eval[i] = d[order[i]];
    evec[i] = Vec3{v[0][order[i]], v[1][order[i]], v[2][order[i]]};
  }
}

}  // namespace detail

/// Least-squares plane through a point set (normal = eigenvector of the
/// covariance with the smallest eigenvalue).
inline PlaneFit fit_plane(std::span<const Vec3> pts) {
  if (pts.size() < 3) throw std::invalid_argument("fit_plane: need at least 3 points");
  Vec3 c{0, 0, 0};
  for (const auto& p : pts) c = c + p;
  c = c / static_cast<double>(pts.size());
  std::array<std::array<double, 3>, 3> cov{};
  for (const auto& p : pts) {
    Vec3 d = p - c;
    cov[0][0] += d.x * d.x; cov[0][1] += d.x * d.y; cov[0][2] += d.x * d.z;
    cov[1][1] += d.y * d.y; cov[1][2] += d.y * d.z;
    cov[2][2] += d.z * d.z;
  }
  cov[1][0] = cov[0][1]; cov[2][0] = cov[0][2]; cov[2][1] = cov[1][2];
  std::array<double, 3> eval{};
  std::array<Vec3, 3> evec{};
  detail::sym3_eigen(cov, eval, evec);
  Vec3 n = evec[0];
  double nn = norm(n);
  if (nn == 0.0) throw std::invalid_argument("fit_plane: degenerate point set");
  n = n / nn;
  PlaneFit fit{c, n, 0.0};
  for (const auto& p : pts) fit.max_dev = std::max(fit.max_dev, std::abs(dot(p - c, n)));
  return fit;
}

/// Newell normal of a ring; robust against collinear runs, not unit length.
inline Vec3 newell_normal(std::span<const Vec3> ring) {
  size_t n = ring.size();
  if (n >= 2 && ring.front() == ring.back()) n -= 1;
  Vec3 r{0, 0, 0};
  for (size_t i = 0; i < n; ++i) {
    const Vec3& p = ring[i];
    const Vec3& q = ring[(i + 1) % n];
    r.x += (p.y - q.y) * (p.z + q.z);
    r.y += (p.z - q.z) * (p.x + q.x);
    r.z += (p.x - q.x) * (p.y + q.y);
  }
  return r;
}

/// Orthonormal in-plane basis for a unit normal.
inline std::pair<Vec3, Vec3> plane_basis(const Vec3& unit_normal) {
  Vec3 helper = std::abs(unit_normal.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  Vec3 e1 = normalized(cross(helper, unit_normal));
  Vec3 e2 = cross(unit_normal, e1);
  return {e1, e2};
}

inline std::vector<Vec2> project_to_plane(std::span<const Vec3> pts, const Vec3& origin,
                                          const Vec3& e1, const Vec3& e2) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back({dot(p - origin, e1), dot(p - origin, e2)});
  return out;
}

// ---------------------------------------------------------------------------
// Convex hull / minimal oriented rectangle
// ---------------------------------------------------------------------------

/// Andrew's monotone chain; output is CCW without repeated first point.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Vec2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) k--;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) k--;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

struct OrientedRect {
  Vec2 axis_u;  // unit
  Vec2 axis_v;  // unit, perpendicular to axis_u
  double u_min = 0, u_max = 0, v_min = 0, v_max = 0;
};

/// Minimum-area oriented bounding rectangle via rotating edge directions
/// of the convex hull.
inline OrientedRect min_oriented_rect(std::span<const Vec2> pts) {
  std::vector<Vec2> hull = convex_hull(std::vector<Vec2>(pts.begin(), pts.end()));
  if (hull.size() < 2) throw std::invalid_argument("min_oriented_rect: degenerate input");
  OrientedRect best;
  double best_area = std::numeric_limits<double>::infinity();
  size_t n = hull.size();
  for (size_t i = 0; i < n; ++i) {
    Vec2 e = hull[(i + 1) % n] - hull[i];
    double len = norm(e);
    if (len == 0.0) continue;
    Vec2 u{e.x / len, e.y / len};
    Vec2 v{-u.y, u.x};
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& p : hull) {
      double pu = dot(p, u), pv = dot(p, v);
      umin = std::min(umin, pu); umax = std::max(umax, pu);
      vmin = std::min(vmin, pv); vmax = std::max(vmax, pv);
    }
    double area = (umax - umin) * (vmax - vmin);
    if (area < best_area) {
      best_area = area;
      best = {u, v, umin, umax, vmin, vmax};
    }
  }
  if (!std::isfinite(best_area)) throw std::invalid_argument("min_oriented_rect: degenerate input");
  return best;
}

// ---------------------------------------------------------------------------
// Ear clipping
// ---------------------------------------------------------------------------

namespace detail {
inline bool point_in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  double d1 = cross(b - a, p - a);
  double d2 = cross(c - b, p - b);
  double d3 = cross(a - c, p - c);
  bool has_neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
  bool has_pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
  return !(has_neg && has_pos);
}
}  // namespace detail

/// Triangulates a simple polygon (open vertex list, any winding) into
/// index triples. Falls back to fanning when no ear is found, which only
/// happens for degenerate rings.
inline std::vector<std::array<int, 3>> ear_clip(std::span<const Vec2> poly) {
  size_t n = poly.size();
  if (n >= 2 && poly.front() == poly.back()) n -= 1;
  std::vector<std::array<int, 3>> tris;
  if (n < 3) return tris;
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  double area2 = signed_area(poly.subspan(0, n));
  double orient = area2 >= 0 ? 1.0 : -1.0;

  size_t guard = 0;
  while (idx.size() > 3 && guard++ < n * n + 16) {
    bool clipped = false;
    for (size_t i = 0; i < idx.size(); ++i) {
      int ia = idx[(i + idx.size() - 1) % idx.size()];
      int ib = idx[i];
      int ic = idx[(i + 1) % idx.size()];
      const Vec2& a = poly[ia];
      const Vec2& b = poly[ib];
      const Vec2& c = poly[ic];
      if (orient * cross(b - a, c - a) <= 0) continue;  // reflex or collinear
      bool contains_other = false;
      for (int j : idx) {
        if (j == ia || j == ib || j == ic) continue;
        if (detail::point_in_triangle(poly[j], a, b, c)) { contains_other = true; break; }
      }
      if (contains_other) continue;
      tris.push_back({ia, ib, ic});
      idx.erase(idx.begin() + static_cast<long>(i));
      clipped = true;
      break;
    }
    if (!clipped) break;  // degenerate remainder, fan what is left
  }
  if (idx.size() >= 3) {
    for (size_t i = 1; i + 1 < idx.size(); ++i) tris.push_back({idx[0], idx[i], idx[i + 1]});
  }
  return tris;
}

// ---------------------------------------------------------------------------
// Wall frame (affine rectangle frame over corner points)
// ---------------------------------------------------------------------------

/// Four-corner frame over a wall: f(0,0)=P1 (top-left), f(1,0)=P2
/// (top-right), f(0,1)=P3 (bottom-left), f(1,1)=P4 (bottom-right) under
/// bilinear interpolation; v grows toward the wall bottom so that raster
/// row order and wall-space order coincide.
struct WallFrame {
  Point3 p1, p2, p3, p4;
  double width = 0.0;   // |P2 - P1|, meters
  double height = 0.0;  // |P3 - P1|, meters

  static WallFrame from_corners(const Point3& p1, const Point3& p2, const Point3& p3,
                                const Point3& p4) {
    WallFrame f{p1, p2, p3, p4, distance(p1, p2), distance(p1, p3)};
    if (f.width <= 0.0 || f.height <= 0.0)
      throw std::invalid_argument("wall frame: degenerate corners");
    return f;
  }

  /// Bilinear map from normalized (u,v) to 3D.
  Point3 map(double u, double v) const {
    return p1 * ((1.0 - u) * (1.0 - v)) + p2 * (u * (1.0 - v)) + p3 * ((1.0 - u) * v) +
           p4 * (u * v);
  }

  /// Inverse for points on (or near) the wall plane, valid for the
  /// rectangular frames produced by corner derivation.
  Vec2 uv(const Point3& p) const {
    Vec3 eu = (p2 - p1) / width;
    Vec3 ev = (p3 - p1) / height;
    Vec3 d = p - p1;
    return {dot(d, eu) / width, dot(d, ev) / height};
  }
};

inline bool frame_equal(const WallFrame& a, const WallFrame& b, double tol) {
  auto close = [tol](const Point3& x, const Point3& y) { return distance(x, y) <= tol; };
  return close(a.p1, b.p1) && close(a.p2, b.p2) && close(a.p3, b.p3) && close(a.p4, b.p4);
}

}  // namespace lod3kit
