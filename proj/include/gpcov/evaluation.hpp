#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpcov/geometry.hpp"
#include "gpcov/gp.hpp"
#include "gpcov/trade_off.hpp"

namespace gpcov::eval {

enum class Strategy { proposed, oracle, plain, random };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::proposed: return "proposed";
    case Strategy::oracle: return "oracle";
    case Strategy::plain: return "plain";
    case Strategy::random: return "random";
  }
  return "proposed";
}

inline Strategy strategy_from_string(const std::string& name) {
  if (name == "proposed") return Strategy::proposed;
  if (name == "oracle") return Strategy::oracle;
  if (name == "plain") return Strategy::plain;
  if (name == "random") return Strategy::random;
  throw std::invalid_argument("strategy: unknown name '" + name +
                              "' (expected proposed|oracle|plain|random)");
}

/// One row of the per-tick metrics stream.
struct MetricsRecord {
  long tick = 0;
  double time_s = 0.0;
  double coverage_h = 0.0;
  std::vector<double> rmse;          // per robot, id order
  double deviation_pct = 0.0;        // max pairwise estimate deviation
  std::vector<int> dataset_sizes;    // per robot, id order
  std::vector<double> tick_seconds;  // per robot wall time, id order
};

/// Coverage objective: sum over robots of the density-weighted performance over
/// their limited Voronoi cells, plus the saturated -r^2 term over the part of the
/// environment outside every cell. Always <= 0; closer to zero is better.
/// Centralized scoring only; never fed back to the robots.
inline double coverage_objective(std::span<const Vec2> positions,
                                 const geometry::Environment& env,
                                 const geometry::SensingGeometry& geom,
                                 const std::function<double(const Vec2&)>& true_field,
                                 int grid_n = 60, int disk_segments = 32) {
  if (grid_n < 2) throw std::invalid_argument("coverage_objective: grid too coarse");
  std::vector<geometry::VoronoiCell> cells;
  cells.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    std::vector<Vec2> others;
    others.reserve(positions.size());
    for (std::size_t j = 0; j < positions.size(); ++j) {
      if (j == i) continue;
      if ((positions[j] - positions[i]).norm() <= geom.sensing_radius())
        others.push_back(positions[j]);
    }
    cells.push_back(geometry::limited_voronoi_cell(static_cast<int>(i), positions[i], others,
                                                   env, geom, disk_segments));
  }

  const geometry::BoundingBox box = env.bbox();
  const double dx = (box.hi.x() - box.lo.x()) / grid_n;
  const double dy = (box.hi.y() - box.lo.y()) / grid_n;
  const double r = geom.cell_radius();
  const double saturated = -r * r;
  double h = 0.0;
  for (int iy = 0; iy < grid_n; ++iy) {
    for (int ix = 0; ix < grid_n; ++ix) {
      const Vec2 p(box.lo.x() + (ix + 0.5) * dx, box.lo.y() + (iy + 0.5) * dy);
      if (!env.contains(p)) continue;
      const double phi = true_field(p);
      if (!(std::isfinite(phi) && phi >= 0.0))
        throw std::invalid_argument("coverage_objective: field must be non-negative and finite");
      if (phi == 0.0) continue;
      double f = saturated;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!geometry::point_in_convex_polygon(cells[i].vertices, p)) continue;
        const double dist = (p - positions[i]).norm();
        if (dist < best_dist) {
          best_dist = dist;
          f = geometry::performance_value(dist, r);
        }
      }
      h += f * phi * dx * dy;
    }
  }
  return h;
}

/// Root mean squared difference between aligned grids.
inline double rmse(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size())
    throw std::invalid_argument("rmse: grids must have the same size");
  if (estimate.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double d = estimate[i] - truth[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(estimate.size()));
}

/// Largest pairwise mean absolute difference between the robots' field estimates,
/// as a percentage of the current field maximum.
inline double pairwise_deviation(std::span<const std::vector<double>> estimates,
                                 double field_max, double floor_scale = 0.1) {
  if (estimates.size() < 2) return 0.0;
  const double scale = std::max(field_max, floor_scale);
  double worst = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    for (std::size_t j = i + 1; j < estimates.size(); ++j) {
      if (estimates[i].size() != estimates[j].size())
        throw std::invalid_argument("pairwise_deviation: grids must have the same size");
      double acc = 0.0;
      for (std::size_t k = 0; k < estimates[i].size(); ++k)
        acc += std::abs(estimates[i][k] - estimates[j][k]);
      worst = std::max(worst, acc / static_cast<double>(estimates[i].size()));
    }
  }
  return 100.0 * worst / scale;
}

/// Density evaluator backing each strategy. The random strategy ignores the
/// density entirely (it tracks waypoints), so it gets the uniform one.
inline std::function<double(const Vec2&)> baseline_density(
    Strategy strategy, const gp::GpPosterior* posterior, double exploit_weight,
    std::function<double(const Vec2&)> true_field) {
  switch (strategy) {
    case Strategy::oracle:
      return true_field;
    case Strategy::plain:
    case Strategy::random:
      return [](const Vec2&) { return 1.0; };
    case Strategy::proposed:
      break;
  }
  if (posterior == nullptr)
    throw std::invalid_argument("baseline_density: proposed strategy needs a posterior");
  return [posterior, exploit_weight](const Vec2& x) {
    const auto [mean, variance] = posterior->predict_one(x);
    return tradeoff::substitute_density(mean, std::sqrt(std::max(variance, 0.0)),
                                        exploit_weight);
  };
}

}  // namespace gpcov::eval
