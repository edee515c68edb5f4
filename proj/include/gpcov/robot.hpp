#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gpcov/evaluation.hpp"
#include "gpcov/filtering.hpp"
#include "gpcov/geometry.hpp"
#include "gpcov/gp.hpp"
#include "gpcov/random.hpp"
#include "gpcov/trade_off.hpp"

namespace gpcov::robot {

struct ControlConfig {
  double gain = 1.0;   // 1/seconds
  double dt = 0.1;     // seconds per tick
  double v_max = 2.0;  // meters/second

  void validate() const {
    if (!(std::isfinite(gain) && gain > 0.0))
      throw std::invalid_argument("control: gain must be finite and > 0");
    if (!(std::isfinite(dt) && dt > 0.0))
      throw std::invalid_argument("control: dt must be finite and > 0");
    if (!(std::isfinite(v_max) && v_max > 0.0))
      throw std::invalid_argument("control: v_max must be finite and > 0");
    if (gain * dt > 1.0 + 1e-12)
      throw std::invalid_argument("control: gain * dt must be <= 1 (no centroid overshoot)");
  }
};

/// Proportional drive toward the centroid, saturated at v_max.
inline Vec2 control_input(const Vec2& position, const Vec2& centroid, const ControlConfig& cfg) {
  if (!finite(centroid)) throw std::invalid_argument("control_input: non-finite centroid");
  Vec2 u = cfg.gain * (centroid - position);
  const double speed = u.norm();
  if (speed > cfg.v_max) u *= cfg.v_max / speed;
  return u;
}

/// Explicit Euler step, projected back into the environment.
inline Vec2 step_dynamics(const Vec2& position, const Vec2& u, double dt,
                          const geometry::Environment& env) {
  if (!finite(u)) throw std::invalid_argument("step_dynamics: non-finite input");
  return geometry::project_into_polygon(env.vertices(), position + u * dt);
}

struct RobotState {
  int id = 0;
  Vec2 position = Vec2::Zero();
  gp::DatasetPtr dataset = std::make_shared<gp::Dataset>();  // raw measurement values
  gp::Hyperparams hyperparams;
  filtering::NormalizationState normalization;
  long last_retrain_tick = -1;
  std::shared_ptr<const gp::GpPosterior> posterior;  // normalized units
  geometry::VoronoiCell cell;
  Vec2 waypoint = Vec2::Zero();
  bool waypoint_set = false;
  long waypoint_ticks = 0;
  double last_tick_seconds = 0.0;
  long gp_failures = 0;
};

struct RobotSnapshot {
  int id = 0;
  Vec2 position = Vec2::Zero();
  gp::DatasetPtr dataset;
};

/// Round snapshot handed to every robot. Position queries are range-gated (a robot
/// can only sense within its radius); dataset reads go through an accessor that
/// records which robot's data was requested, so a harness can prove no tick ever
/// touched non-neighbor state.
class SnapshotBus {
 public:
  SnapshotBus(std::span<const RobotSnapshot> all,
              std::vector<std::pair<int, int>>* dataset_reads = nullptr)
      : all_(all), reads_(dataset_reads) {}

  std::vector<RobotSnapshot> positions_within(int reader_id, const Vec2& center,
                                              double radius) const {
    std::vector<RobotSnapshot> out;
    for (const RobotSnapshot& s : all_) {
      if (s.id == reader_id) continue;
      if ((s.position - center).norm() <= radius)
        out.push_back(RobotSnapshot{s.id, s.position, nullptr});
    }
    return out;
  }

  gp::DatasetPtr dataset(int reader_id, int target_id) const {
    if (reads_ != nullptr) reads_->emplace_back(reader_id, target_id);
    for (const RobotSnapshot& s : all_)
      if (s.id == target_id) return s.dataset;
    throw std::invalid_argument("snapshot bus: unknown robot id");
  }

 private:
  std::span<const RobotSnapshot> all_;
  std::vector<std::pair<int, int>>* reads_;
};

struct TickContext {
  const geometry::Environment* env = nullptr;
  const geometry::SensingGeometry* geom = nullptr;
  ControlConfig control;
  tradeoff::TradeOffConfig trade_off;
  filtering::FilterTickConfig filter;
  eval::Strategy strategy = eval::Strategy::proposed;
  int cell_grid = 40;       // integration points across the cell bounding box
  int disk_segments = 32;
  std::span<const Vec2> mu_max_grid;
  double now = 0.0;
  long tick = 0;
  std::function<gp::Sample(const Vec2&)> sensor;
  std::function<double(const Vec2&)> true_field;  // oracle strategy
  std::mt19937_64* waypoint_engine = nullptr;     // random strategy
};

namespace detail {

inline gp::Dataset normalized_copy(const gp::Dataset& data,
                                   const filtering::NormalizationState& ns) {
  gp::Dataset out = data;
  for (gp::Sample& s : out) s.value = ns.normalize(s.value);
  return out;
}

}  // namespace detail

/// One synchronous-round step of a single robot: sense, exchange and filter data,
/// refresh the posterior, integrate the substitute density over the limited
/// Voronoi cell, and take one Lloyd step. A GP factorization failure downgrades
/// the tick to zero velocity with the dataset left unchanged.
inline RobotState robot_tick(const RobotState& self, const SnapshotBus& bus,
                             const TickContext& ctx) {
  const auto started = std::chrono::steady_clock::now();
  RobotState next = self;
  const auto neighbors =
      bus.positions_within(self.id, self.position, ctx.geom->sensing_radius());
  try {
    const gp::Sample sensed = ctx.sensor(self.position);

    if (ctx.strategy == eval::Strategy::proposed) {
      std::vector<gp::DatasetPtr> neighbor_data;
      neighbor_data.reserve(neighbors.size());
      for (const RobotSnapshot& nb : neighbors)
        neighbor_data.push_back(bus.dataset(self.id, nb.id));
      auto filtered = filtering::robot_filter_tick(*self.dataset, sensed, neighbor_data,
                                                   ctx.filter, self.hyperparams,
                                                   self.normalization, ctx.now, ctx.tick,
                                                   ctx.mu_max_grid);
      next.dataset = std::make_shared<gp::Dataset>(std::move(filtered.dataset));
      next.hyperparams = filtered.hyperparams;
      next.normalization = filtered.normalization;
      if (filtered.retrained) next.last_retrain_tick = ctx.tick;
      next.posterior = std::make_shared<gp::GpPosterior>(
          detail::normalized_copy(*next.dataset, next.normalization), next.hyperparams,
          ctx.filter.decay, ctx.now);
    }

    std::vector<Vec2> neighbor_positions;
    neighbor_positions.reserve(neighbors.size());
    for (const RobotSnapshot& nb : neighbors) neighbor_positions.push_back(nb.position);
    geometry::VoronoiCell cell = geometry::limited_voronoi_cell(
        self.id, self.position, neighbor_positions, *ctx.env, *ctx.geom, ctx.disk_segments);

    Vec2 target;
    if (ctx.strategy == eval::Strategy::random) {
      if (ctx.waypoint_engine == nullptr)
        throw std::invalid_argument("robot_tick: random strategy needs a waypoint engine");
      const bool arrived =
          next.waypoint_set && (self.position - next.waypoint).norm() < 0.1;
      if (!next.waypoint_set || arrived || next.waypoint_ticks >= 50) {
        next.waypoint = rng::uniform_in_polygon(*ctx.waypoint_engine, ctx.env->vertices());
        next.waypoint_set = true;
        next.waypoint_ticks = 0;
      }
      ++next.waypoint_ticks;
      cell.mass = 0.0;
      cell.centroid = geometry::polygon_centroid(cell.vertices);
      target = next.waypoint;
    } else {
      const geometry::BoundingBox box = geometry::polygon_bbox(cell.vertices);
      const double extent =
          std::max(box.hi.x() - box.lo.x(), box.hi.y() - box.lo.y());
      const double resolution = std::max(extent / ctx.cell_grid, 1e-9);
      geometry::MassCentroid mc;
      if (ctx.strategy == eval::Strategy::proposed) {
        const double w = tradeoff::weight(ctx.now, ctx.trade_off);
        const gp::GpPosterior& model = *next.posterior;
        mc = geometry::cell_mass_centroid_batch(
            cell,
            [&model, w](std::span<const Vec2> pts, std::span<double> out) {
              Eigen::VectorXd mu, var;
              model.predict(pts, mu, var);
              for (std::size_t i = 0; i < pts.size(); ++i) {
                const auto k = static_cast<Eigen::Index>(i);
                out[i] = tradeoff::substitute_density(
                    mu[k], std::sqrt(std::max(var[k], 0.0)), w);
              }
            },
            resolution);
      } else if (ctx.strategy == eval::Strategy::oracle) {
        mc = geometry::cell_mass_centroid(cell, ctx.true_field, resolution);
      } else {  // plain: uniform density
        mc = geometry::cell_mass_centroid(
            cell, [](const Vec2&) { return 1.0; }, resolution);
      }
      cell.mass = mc.mass;
      cell.centroid = mc.centroid;
      target = mc.centroid;
    }
    next.cell = std::move(cell);

    const Vec2 u = control_input(self.position, target, ctx.control);
    next.position = step_dynamics(self.position, u, ctx.control.dt, *ctx.env);
  } catch (const gp::FactorizationError&) {
    next = self;  // fail-safe: zero velocity, dataset unchanged
    next.gp_failures = self.gp_failures + 1;
  }
  next.last_tick_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return next;
}

}  // namespace gpcov::robot
