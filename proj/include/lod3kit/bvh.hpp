#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "lod3kit/geom.hpp"

namespace lod3kit {

struct Triangle {
  Point3 a, b, c;
  int wall = -1;  // owning wall index
  int tri = -1;   // triangle index within the whole scene
};

struct Hit {
  double dist = std::numeric_limits<double>::infinity();
  int wall = -1;
  int tri = -1;
};

/// Strict ordering used by both the exhaustive search and the BVH so the
/// two return bit-identical winners even when distances tie exactly
/// (e.g. a ray through a shared fan edge).
inline bool hit_better(const Hit& a, const Hit& b) {
  if (a.dist != b.dist) return a.dist < b.dist;
  if (a.wall != b.wall) return a.wall < b.wall;
  return a.tri < b.tri;
}

/// Möller–Trumbore ray/triangle intersection; returns the ray parameter
/// (= distance for unit directions) of the hit, or nothing. Barycentric
/// bounds get a hair of slack so rays through shared edges register on
/// both triangles rather than neither.
inline std::optional<double> intersect_triangle(const Point3& origin, const Vec3& dir,
                                                const Triangle& t, double eps_hit = 1e-9) {
  constexpr double kBaryEps = 1e-12;
  Vec3 e1 = t.b - t.a;
  Vec3 e2 = t.c - t.a;
  Vec3 pvec = cross(dir, e2);
  double det = dot(e1, pvec);
  if (std::abs(det) < 1e-14) return std::nullopt;
  double inv_det = 1.0 / det;
  Vec3 tvec = origin - t.a;
  double u = dot(tvec, pvec) * inv_det;
  if (u < -kBaryEps || u > 1.0 + kBaryEps) return std::nullopt;
  Vec3 qvec = cross(tvec, e1);
  double v = dot(dir, qvec) * inv_det;
  if (v < -kBaryEps || u + v > 1.0 + kBaryEps) return std::nullopt;
  double s = dot(e2, qvec) * inv_det;
  if (s <= eps_hit) return std::nullopt;
  return s;
}

/// Reference nearest-hit: every triangle, in order.
inline std::optional<Hit> nearest_hit_exhaustive(const std::vector<Triangle>& tris,
                                                 const Point3& origin, const Vec3& dir,
                                                 double eps_hit = 1e-9) {
  Hit best;
  for (const Triangle& t : tris) {
    if (auto s = intersect_triangle(origin, dir, t, eps_hit)) {
      Hit h{*s, t.wall, t.tri};
      if (hit_better(h, best)) best = h;
    }
  }
  if (best.tri < 0) return std::nullopt;
  return best;
}

struct Aabb {
  Point3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
  Point3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

  void grow(const Point3& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  void grow(const Aabb& o) {
    grow(o.lo);
    grow(o.hi);
  }
  Point3 center() const { return (lo + hi) * 0.5; }
};

/// Bounding-volume hierarchy over triangles; nearest-hit queries agree
/// with nearest_hit_exhaustive on the same triangle list.
class Bvh {
 public:
  Bvh() = default;

  explicit Bvh(std::vector<Triangle> tris) : tris_(std::move(tris)) {
    if (tris_.empty()) return;
    std::vector<Aabb> boxes(tris_.size());
    std::vector<Point3> centers(tris_.size());
    for (size_t i = 0; i < tris_.size(); ++i) {
      boxes[i].grow(tris_[i].a);
      boxes[i].grow(tris_[i].b);
      boxes[i].grow(tris_[i].c);
      centers[i] = boxes[i].center();
    }
    std::vector<int> order(tris_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    nodes_.reserve(tris_.size() * 2);
    build(order, 0, static_cast<int>(order.size()), boxes, centers, 0);
    // reorder triangles into leaf visit order
    std::vector<Triangle> sorted;
    sorted.reserve(tris_.size());
    for (int ix : order) sorted.push_back(tris_[ix]);
    tris_ = std::move(sorted);
  }

  const std::vector<Triangle>& triangles() const { return tris_; }

  std::optional<Hit> nearest(const Point3& origin, const Vec3& dir, double eps_hit = 1e-9) const {
    if (nodes_.empty()) return std::nullopt;
    Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    Hit best;
    // manual stack; children pushed far-first so the near child pops first.
    // Tree depth is capped at kForceMedianDepth + log2(n) by construction.
    std::array<int, 128> stack;
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!box_hits(node.box, origin, inv, best.dist)) continue;
      if (node.count > 0) {
        for (int i = node.first; i < node.first + node.count; ++i) {
          if (auto s = intersect_triangle(origin, dir, tris_[i], eps_hit)) {
            Hit h{*s, tris_[i].wall, tris_[i].tri};
            if (hit_better(h, best)) best = h;
          }
        }
      } else {
        double d_left = box_entry(nodes_[node.left].box, origin, inv);
        double d_right = box_entry(nodes_[node.right].box, origin, inv);
        int near = node.left, far = node.right;
        if (d_right < d_left) std::swap(near, far);
        stack[top++] = far;
        stack[top++] = near;
      }
    }
    if (best.tri < 0) return std::nullopt;
    return best;
  }

 private:
  struct Node {
    Aabb box;
    int left = -1, right = -1;  // internal
    int first = 0, count = 0;   // leaf when count > 0
  };

  std::vector<Triangle> tris_;
  std::vector<Node> nodes_;

  static constexpr int kLeafSize = 4;
  static constexpr int kForceMedianDepth = 24;  // guarantees O(log n) depth below this

  int build(std::vector<int>& order, int begin, int end, const std::vector<Aabb>& boxes,
            const std::vector<Point3>& centers, int depth) {
    int node_ix = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Aabb box;
    for (int i = begin; i < end; ++i) box.grow(boxes[order[i]]);
    nodes_[node_ix].box = box;
    int n = end - begin;
    if (n <= kLeafSize) {
      nodes_[node_ix].first = begin;
      nodes_[node_ix].count = n;
      return node_ix;
    }
    // split on the widest centroid axis at its midpoint; median fallback
    Aabb cbox;
    for (int i = begin; i < end; ++i) cbox.grow(centers[order[i]]);
    Vec3 extent = cbox.hi - cbox.lo;
    int axis = 0;
    if (extent.y > extent.x) axis = 1;
    if (extent.z > (axis == 0 ? extent.x : extent.y)) axis = 2;
    auto coord = [&](int ix) {
      const Point3& c = centers[ix];
      return axis == 0 ? c.x : axis == 1 ? c.y : c.z;
    };
    double mid = (axis == 0 ? cbox.lo.x + cbox.hi.x
                  : axis == 1 ? cbox.lo.y + cbox.hi.y
                              : cbox.lo.z + cbox.hi.z) *
                 0.5;
    int split = begin;
    if (depth < kForceMedianDepth) {
      auto it = std::partition(order.begin() + begin, order.begin() + end,
                               [&](int ix) { return coord(ix) < mid; });
      split = static_cast<int>(it - order.begin());
    }
    if (split == begin || split == end) {
      split = begin + n / 2;
      std::nth_element(order.begin() + begin, order.begin() + split, order.begin() + end,
                       [&](int a, int b) { return coord(a) < coord(b); });
    }
    int left = build(order, begin, split, boxes, centers, depth + 1);
    int right = build(order, split, end, boxes, centers, depth + 1);
    nodes_[node_ix].left = left;
    nodes_[node_ix].right = right;
    return node_ix;
  }

  // Slab test against [0, t_limit]; NaN lanes (zero direction component on
  // a box face) impose no constraint, which errs toward testing contents.
  static bool box_hits(const Aabb& box, const Point3& o, const Vec3& inv, double t_limit) {
    double t0 = 0.0, t1 = t_limit;
    auto clip = [&](double lo, double hi, double oc, double ic) {
      double a = (lo - oc) * ic;
      double b = (hi - oc) * ic;
      if (a > b) std::swap(a, b);
      if (std::isnan(a) || std::isnan(b)) return;
      if (a > t0) t0 = a;
      if (b < t1) t1 = b;
    };
    clip(box.lo.x, box.hi.x, o.x, inv.x);
    clip(box.lo.y, box.hi.y, o.y, inv.y);
    clip(box.lo.z, box.hi.z, o.z, inv.z);
    return t0 <= t1;
  }

  static double box_entry(const Aabb& box, const Point3& o, const Vec3& inv) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    auto clip = [&](double lo, double hi, double oc, double ic) {
      double a = (lo - oc) * ic;
      double b = (hi - oc) * ic;
      if (a > b) std::swap(a, b);
      if (std::isnan(a) || std::isnan(b)) return;
      if (a > t0) t0 = a;
      if (b < t1) t1 = b;
    };
    clip(box.lo.x, box.hi.x, o.x, inv.x);
    clip(box.lo.y, box.hi.y, o.y, inv.y);
    clip(box.lo.z, box.hi.z, o.z, inv.z);
    return t0 <= t1 ? t0 : std::numeric_limits<double>::infinity();
  }
};

}  // namespace lod3kit
