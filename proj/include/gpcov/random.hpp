#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include "gpcov/geometry.hpp"

namespace gpcov::rng {

// One root seed is split into independent per-robot, per-purpose streams by stable
// key derivation, so adding a robot leaves every other stream untouched.
enum class Stream : std::uint64_t {
  init_position = 1,
  sensing = 2,
  waypoint = 3,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, Stream purpose, std::uint64_t key) {
  std::uint64_t h = splitmix64(root);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ key);
  return h;
}

inline std::mt19937_64 make_engine(std::uint64_t root, Stream purpose, std::uint64_t key) {
  return std::mt19937_64(derive_seed(root, purpose, key));
}

/// Uniform sample inside a convex polygon by rejection from its bounding box.
inline Vec2 uniform_in_polygon(std::mt19937_64& engine, const geometry::Polygon& poly) {
  const geometry::BoundingBox box = geometry::polygon_bbox(poly);
  std::uniform_real_distribution<double> ux(box.lo.x(), box.hi.x());
  std::uniform_real_distribution<double> uy(box.lo.y(), box.hi.y());
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const Vec2 p(ux(engine), uy(engine));
    if (geometry::point_in_convex_polygon(poly, p)) return p;
  }
  throw std::runtime_error("uniform_in_polygon: rejection sampling failed");
}

}  // namespace gpcov::rng
