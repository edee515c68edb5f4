#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpcov {

using Vec2 = Eigen::Vector2d;

inline bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

namespace geometry {

/// Vertices in counter-clockwise order. All polygons in this module are convex.
using Polygon = std::vector<Vec2>;

inline constexpr double kContainTol = 1e-9;
inline constexpr double kMassFloor = 1e-12;

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double polygon_area(const Polygon& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    twice += cross2(a, b);
  }
  return 0.5 * twice;
}

/// Area-weighted centroid; falls back to the vertex mean for near-degenerate polygons.
inline Vec2 polygon_centroid(const Polygon& poly) {
  if (poly.empty()) throw std::invalid_argument("polygon_centroid: empty polygon");
  const double area = polygon_area(poly);
  if (std::abs(area) < 1e-14) {
    Vec2 mean = Vec2::Zero();
    for (const Vec2& v : poly) mean += v;
    return mean / static_cast<double>(poly.size());
  }
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    c += (a + b) * cross2(a, b);
  }
  return c / (6.0 * area);
}

inline bool point_in_convex_polygon(const Polygon& poly, const Vec2& p, double tol = kContainTol) {
  if (poly.size() < 3) return false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    if (cross2(b - a, p - a) < -tol) return false;
  }
  return true;
}

struct BoundingBox {
  Vec2 lo{0, 0};
  Vec2 hi{0, 0};
};

inline BoundingBox polygon_bbox(const Polygon& poly) {
  if (poly.empty()) throw std::invalid_argument("polygon_bbox: empty polygon");
  BoundingBox box{poly.front(), poly.front()};
  for (const Vec2& v : poly) {
    box.lo = box.lo.cwiseMin(v);
    box.hi = box.hi.cwiseMax(v);
  }
  return box;
}

/// Convex environment polygon, counter-clockwise.
class Environment {
 public:
  Environment() = default;

  explicit Environment(Polygon vertices) : vertices_(std::move(vertices)) {
    validate(vertices_);
  }

  static void validate(const Polygon& verts) {
    if (verts.size() < 3)
      throw std::invalid_argument("environment: needs at least 3 vertices");
    for (const Vec2& v : verts)
      if (!finite(v)) throw std::invalid_argument("environment: non-finite vertex");
    const std::size_t n = verts.size();
    for (std::size_t i = 0; i < n; ++i) {
      if ((verts[(i + 1) % n] - verts[i]).norm() < 1e-12)
        throw std::invalid_argument("environment: consecutive vertices coincide");
    }
    double area2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 e0 = verts[(i + 1) % n] - verts[i];
      const Vec2 e1 = verts[(i + 2) % n] - verts[(i + 1) % n];
      if (cross2(e0, e1) < -1e-12)
        throw std::invalid_argument("environment: polygon is not convex counter-clockwise");
      area2 += cross2(verts[i], verts[(i + 1) % n]);
    }
    if (area2 <= 0.0)
      throw std::invalid_argument("environment: vertices must wind counter-clockwise");
  }

  const Polygon& vertices() const { return vertices_; }
  bool contains(const Vec2& p, double tol = kContainTol) const {
    return point_in_convex_polygon(vertices_, p, tol);
  }
  double area() const { return polygon_area(vertices_); }
  BoundingBox bbox() const { return polygon_bbox(vertices_); }

  /// Largest pairwise vertex distance; for a convex polygon this is the diameter.
  double diameter() const {
    double best = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i)
      for (std::size_t j = i + 1; j < vertices_.size(); ++j)
        best = std::max(best, (vertices_[i] - vertices_[j]).norm());
    return best;
  }

 private:
  Polygon vertices_;
};

/// Sensing radius R; the Voronoi cells are limited to r = R/2 by construction.
class SensingGeometry {
 public:
  SensingGeometry() = default;
  explicit SensingGeometry(double sensing_radius) : sensing_radius_(sensing_radius) {
    if (!(std::isfinite(sensing_radius) && sensing_radius > 0.0))
      throw std::invalid_argument("sensing geometry: sensing radius must be finite and > 0");
  }
  double sensing_radius() const { return sensing_radius_; }
  double cell_radius() const { return 0.5 * sensing_radius_; }

 private:
  double sensing_radius_ = 1.0;
};

struct VoronoiCell {
  int owner = -1;
  Polygon vertices;
  double mass = 0.0;
  Vec2 centroid = Vec2::Zero();
};

/// Regular polygon inscribed in the circle of the given radius.
inline Polygon disk_polygon(const Vec2& center, double radius, int segments) {
  if (!finite(center) || !std::isfinite(radius))
    throw std::invalid_argument("disk_polygon: non-finite center or radius");
  if (!(radius > 0.0)) throw std::invalid_argument("disk_polygon: radius must be > 0");
  if (segments < 3) throw std::invalid_argument("disk_polygon: needs at least 3 segments");
  Polygon poly;
  poly.reserve(static_cast<std::size_t>(segments));
  for (int k = 0; k < segments; ++k) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / segments;
    poly.emplace_back(center.x() + radius * std::cos(theta),
                      center.y() + radius * std::sin(theta));
  }
  return poly;
}

/// Intersects a convex CCW polygon with the half-plane
/// { x : (x - point) . outward_normal <= 0 }. May return an empty polygon.
inline Polygon clip_halfplane(const Polygon& poly, const Vec2& point, const Vec2& outward_normal) {
  if (poly.empty()) return {};
  Polygon out;
  out.reserve(poly.size() + 1);
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const double da = (a - point).dot(outward_normal);
    const double db = (b - point).dot(outward_normal);
    if (da <= 0.0) out.push_back(a);
    if ((da < 0.0 && db > 0.0) || (da > 0.0 && db <= 0.0)) {
      const double t = da / (da - db);
      out.push_back(a + t * (b - a));
    }
  }
  // drop duplicate vertices introduced by crossings exactly at a vertex
  Polygon cleaned;
  cleaned.reserve(out.size());
  for (const Vec2& v : out) {
    if (cleaned.empty() || (v - cleaned.back()).norm() > 1e-12) cleaned.push_back(v);
  }
  while (cleaned.size() > 1 && (cleaned.front() - cleaned.back()).norm() <= 1e-12)
    cleaned.pop_back();
  if (cleaned.size() < 3) return {};
  return cleaned;
}

/// Intersection of two convex CCW polygons.
inline Polygon intersect_convex(const Polygon& a, const Polygon& b) {
  if (a.empty() || b.empty()) return {};
  Polygon out = a;
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < n && !out.empty(); ++i) {
    const Vec2& v0 = b[i];
    const Vec2& v1 = b[(i + 1) % n];
    const Vec2 edge = v1 - v0;
    const Vec2 outward(edge.y(), -edge.x());
    out = clip_halfplane(out, v0, outward);
  }
  return out;
}

/// Range-limited Voronoi cell: environment, clipped to the inscribed disk polygon of
/// radius r around the owner, then to the bisector toward each in-range neighbor.
/// Mass and centroid are left unset.
inline VoronoiCell limited_voronoi_cell(int owner, const Vec2& position,
                                        std::span<const Vec2> neighbors,
                                        const Environment& env, const SensingGeometry& geom,
                                        int segments = 32) {
  if (!env.contains(position))
    throw std::invalid_argument("limited_voronoi_cell: owner position outside environment");
  Polygon cell = disk_polygon(position, geom.cell_radius(), segments);
  const Polygon& q = env.vertices();
  for (std::size_t i = 0; i < q.size() && !cell.empty(); ++i) {
    const Vec2& v0 = q[i];
    const Vec2& v1 = q[(i + 1) % q.size()];
    const Vec2 edge = v1 - v0;
    const Vec2 outward(edge.y(), -edge.x());
    cell = clip_halfplane(cell, v0, outward);
  }
  for (const Vec2& nb : neighbors) {
    const Vec2 diff = nb - position;
    const double dist = diff.norm();
    if (dist > geom.sensing_radius() || dist < 1e-12) continue;  // out of range or coincident
    const Vec2 mid = 0.5 * (position + nb);
    cell = clip_halfplane(cell, mid, diff / dist);
    if (cell.empty()) break;
  }
  VoronoiCell result;
  result.owner = owner;
  result.vertices = std::move(cell);
  return result;
}

/// Sensing performance as a function of distance: -min(s^2, r^2).
inline double performance_value(double s, double r) {
  return -std::min(s * s, r * r);
}

struct MassCentroid {
  double mass = 0.0;
  Vec2 centroid = Vec2::Zero();
};

/// Riemann sum on a regular grid over the cell bounding box. The evaluator is called
/// once with every grid point inside the cell and must fill non-negative finite values.
inline MassCentroid cell_mass_centroid_batch(
    const VoronoiCell& cell,
    const std::function<void(std::span<const Vec2>, std::span<double>)>& density,
    double resolution) {
  if (!(std::isfinite(resolution) && resolution > 0.0))
    throw std::invalid_argument("cell_mass_centroid: resolution must be finite and > 0");
  if (cell.vertices.size() < 3)
    return {0.0, cell.vertices.empty() ? Vec2::Zero() : polygon_centroid(cell.vertices)};

  const BoundingBox box = polygon_bbox(cell.vertices);
  const int nx = std::max(1, static_cast<int>(std::ceil((box.hi.x() - box.lo.x()) / resolution)));
  const int ny = std::max(1, static_cast<int>(std::ceil((box.hi.y() - box.lo.y()) / resolution)));

  std::vector<Vec2> points;
  points.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  for (int iy = 0; iy < ny; ++iy) {
    const double y = box.lo.y() + (iy + 0.5) * resolution;
    for (int ix = 0; ix < nx; ++ix) {
      const Vec2 p(box.lo.x() + (ix + 0.5) * resolution, y);
      if (point_in_convex_polygon(cell.vertices, p)) points.push_back(p);
    }
  }
  if (points.empty()) return {0.0, polygon_centroid(cell.vertices)};

  std::vector<double> values(points.size(), 0.0);
  density(points, values);

  const double da = resolution * resolution;
  double mass = 0.0;
  Vec2 moment = Vec2::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double phi = values[i];
    if (!std::isfinite(phi) || phi < -1e-12)
      throw std::invalid_argument("cell_mass_centroid: density must be non-negative and finite");
    mass += phi * da;
    moment += points[i] * (phi * da);
  }
  if (mass < kMassFloor) return {0.0, polygon_centroid(cell.vertices)};
  return {mass, moment / mass};
}

inline MassCentroid cell_mass_centroid(const VoronoiCell& cell,
                                       const std::function<double(const Vec2&)>& density,
                                       double resolution) {
  return cell_mass_centroid_batch(
      cell,
      [&density](std::span<const Vec2> pts, std::span<double> out) {
        for (std::size_t i = 0; i < pts.size(); ++i) out[i] = density(pts[i]);
      },
      resolution);
}

/// Nearest point of the convex polygon to p (p itself when already inside).
inline Vec2 project_into_polygon(const Polygon& poly, const Vec2& p) {
  if (point_in_convex_polygon(poly, p, 0.0)) return p;
  double best_d2 = std::numeric_limits<double>::infinity();
  Vec2 best = p;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 q = a + t * ab;
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = q;
    }
  }
  return best;
}

}  // namespace geometry
}  // namespace gpcov
