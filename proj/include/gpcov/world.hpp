#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gpcov/evaluation.hpp"
#include "gpcov/filtering.hpp"
#include "gpcov/geometry.hpp"
#include "gpcov/gp.hpp"
#include "gpcov/random.hpp"
#include "gpcov/robot.hpp"

namespace gpcov::world {

/// One Gaussian bump with piecewise-linear weight and center motion. The local
/// clock restarts at the change event that activated the component set.
struct GaussComponent {
  double weight = 1.0;
  double weight_rate = 0.0;  // per second
  Vec2 center = Vec2::Zero();
  Vec2 center_velocity = Vec2::Zero();  // meters per second
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d inv_covariance = Eigen::Matrix2d::Identity();

  void prepare() {
    if (!std::isfinite(weight) || weight < 0.0)
      throw std::invalid_argument("field component: weight must be finite and >= 0");
    if (!finite(center) || !finite(center_velocity) || !std::isfinite(weight_rate))
      throw std::invalid_argument("field component: non-finite parameter");
    const double det = covariance.determinant();
    if (!(covariance(0, 1) == covariance(1, 0)) || !(covariance(0, 0) > 0.0) || !(det > 0.0))
      throw std::invalid_argument("field component: covariance must be symmetric positive definite");
    inv_covariance = covariance.inverse();
  }

  double value(const Vec2& x, double local_t) const {
    const double w = std::max(0.0, weight + weight_rate * local_t);
    if (w == 0.0) return 0.0;
    const Vec2 d = x - (center + center_velocity * local_t);
    return w * std::exp(-0.5 * d.dot(inv_covariance * d));
  }
};

struct ChangeEvent {
  double time = 0.0;
  std::vector<GaussComponent> components;
};

/// Regular scalar grid with bilinear interpolation; row 0 holds the minimum-y row.
class GridField {
 public:
  GridField() = default;
  GridField(int ncols, int nrows, double cell_size, double origin_x, double origin_y,
            std::vector<double> values)
      : ncols_(ncols), nrows_(nrows), cell_size_(cell_size), origin_x_(origin_x),
        origin_y_(origin_y), values_(std::move(values)) {
    if (ncols_ < 2 || nrows_ < 2)
      throw std::invalid_argument("grid field: needs at least 2x2 nodes");
    if (!(cell_size_ > 0.0) || !std::isfinite(cell_size_))
      throw std::invalid_argument("grid field: cell size must be finite and > 0");
    if (values_.size() != static_cast<std::size_t>(ncols_) * static_cast<std::size_t>(nrows_))
      throw std::invalid_argument("grid field: value count does not match ncols*nrows");
    for (double v : values_)
      if (!std::isfinite(v) || v < 0.0)
        throw std::invalid_argument("grid field: values must be non-negative and finite");
  }

  int ncols() const { return ncols_; }
  int nrows() const { return nrows_; }
  double cell_size() const { return cell_size_; }
  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  const std::vector<double>& values() const { return values_; }
  double at(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * static_cast<std::size_t>(ncols_) +
                   static_cast<std::size_t>(col)];
  }

  bool covers(const Vec2& p) const {
    const double max_x = origin_x_ + (ncols_ - 1) * cell_size_;
    const double max_y = origin_y_ + (nrows_ - 1) * cell_size_;
    return p.x() >= origin_x_ - 1e-9 && p.x() <= max_x + 1e-9 && p.y() >= origin_y_ - 1e-9 &&
           p.y() <= max_y + 1e-9;
  }

  double value_at(const Vec2& p) const {
    if (!covers(p)) throw std::invalid_argument("grid field: query outside grid extent");
    const double fx = std::clamp((p.x() - origin_x_) / cell_size_, 0.0,
                                 static_cast<double>(ncols_ - 1));
    const double fy = std::clamp((p.y() - origin_y_) / cell_size_, 0.0,
                                 static_cast<double>(nrows_ - 1));
    const int c0 = std::min(static_cast<int>(fx), ncols_ - 2);
    const int r0 = std::min(static_cast<int>(fy), nrows_ - 2);
    const double tx = fx - c0;
    const double ty = fy - r0;
    return (1 - tx) * (1 - ty) * at(r0, c0) + tx * (1 - ty) * at(r0, c0 + 1) +
           (1 - tx) * ty * at(r0 + 1, c0) + tx * ty * at(r0 + 1, c0 + 1);
  }

 private:
  int ncols_ = 0;
  int nrows_ = 0;
  double cell_size_ = 1.0;
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  std::vector<double> values_;
};

namespace detail {

inline std::vector<double> parse_csv_row(const std::string& line, const char* what) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(what) + ": not a number: '" + tok + "'");
    }
    while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
    if (pos != tok.size())
      throw std::invalid_argument(std::string(what) + ": trailing junk in '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

/// Grid CSV format: header `ncols,nrows,cell_size_m,origin_x,origin_y`, then nrows
/// lines of ncols comma-separated non-negative values, row 0 at minimum y.
inline GridField load_grid_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("grid csv: empty input");
  const std::vector<double> header = detail::parse_csv_row(line, "grid csv header");
  if (header.size() != 5)
    throw std::invalid_argument("grid csv: header must be ncols,nrows,cell_size_m,origin_x,origin_y");
  const int ncols = static_cast<int>(header[0]);
  const int nrows = static_cast<int>(header[1]);
  if (header[0] != ncols || header[1] != nrows)
    throw std::invalid_argument("grid csv: ncols and nrows must be integers");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(std::max(ncols, 0)) *
                 static_cast<std::size_t>(std::max(nrows, 0)));
  int rows_read = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    if (rows_read == nrows)
      throw std::invalid_argument("grid csv: more data rows than the declared nrows");
    const std::vector<double> row = detail::parse_csv_row(line, "grid csv row");
    if (static_cast<int>(row.size()) != ncols)
      throw std::invalid_argument("grid csv: row " + std::to_string(rows_read) + " has " +
                                  std::to_string(row.size()) + " values, expected " +
                                  std::to_string(ncols));
    values.insert(values.end(), row.begin(), row.end());
    ++rows_read;
  }
  if (rows_read != nrows)
    throw std::invalid_argument("grid csv: expected " + std::to_string(nrows) + " rows, got " +
                                std::to_string(rows_read));
  return GridField(ncols, nrows, header[2], header[3], header[4], std::move(values));
}

inline GridField load_grid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("grid csv: cannot open " + path);
  return load_grid_csv(in);
}

inline void save_grid_csv(std::ostream& out, const GridField& grid) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g\n", grid.ncols(), grid.nrows(),
                grid.cell_size(), grid.origin_x(), grid.origin_y());
  out << buf;
  for (int r = 0; r < grid.nrows(); ++r) {
    for (int c = 0; c < grid.ncols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", grid.at(r, c));
      out << buf << (c + 1 == grid.ncols() ? "\n" : ",");
    }
  }
}

struct FieldProgram {
  enum class Kind { gaussian_mixture, grid_csv };
  Kind kind = Kind::gaussian_mixture;
  std::vector<GaussComponent> components;
  std::vector<ChangeEvent> change_events;  // sorted by time
  std::optional<GridField> grid;

  void prepare() {
    if (kind == Kind::grid_csv) {
      if (!grid.has_value()) throw std::invalid_argument("field: grid_csv kind without a grid");
      return;
    }
    for (GaussComponent& c : components) c.prepare();
    for (std::size_t i = 0; i < change_events.size(); ++i) {
      for (GaussComponent& c : change_events[i].components) c.prepare();
      if (i > 0 && change_events[i].time < change_events[i - 1].time)
        throw std::invalid_argument("field: change events must be sorted by time");
    }
  }

  double value(const Vec2& x, double t) const {
    if (kind == Kind::grid_csv) return grid->value_at(x);
    const std::vector<GaussComponent>* active = &components;
    double segment_start = 0.0;
    for (const ChangeEvent& ev : change_events) {
      if (t >= ev.time) {
        active = &ev.components;
        segment_start = ev.time;
      } else {
        break;
      }
    }
    const double local_t = t - segment_start;
    double v = 0.0;
    for (const GaussComponent& c : *active) v += c.value(x, local_t);
    return v;
  }
};

/// Ground-truth field value; rejects queries outside the environment.
inline double field_value(const FieldProgram& field, const geometry::Environment& env,
                          const Vec2& x, double t) {
  if (!env.contains(x)) throw std::invalid_argument("field_value: query outside environment");
  return field.value(x, t);
}

struct WorldConfig {
  geometry::Environment env;
  geometry::SensingGeometry geom{1.0};
  robot::ControlConfig control;
  tradeoff::TradeOffConfig trade_off;
  filtering::FilterTickConfig filter;
  gp::Hyperparams start_hyperparams;
  eval::Strategy strategy = eval::Strategy::proposed;
  double sensor_noise_std = 0.005;
  int cell_grid = 40;
  int eval_grid = 60;
  int disk_segments = 32;
  std::uint64_t seed = 1;
};

struct RobotInit {
  int id = 0;
  std::optional<Vec2> position;  // drawn uniformly in the environment when absent
};

/// The simulator: ground truth field, robot states, seeded noise streams and the
/// synchronous round barrier. All mutation happens inside step().
class World {
 public:
  World(WorldConfig config, FieldProgram field, const std::vector<RobotInit>& robots)
      : cfg_(std::move(config)), field_(std::move(field)) {
    cfg_.control.validate();
    cfg_.trade_off.validate();
    cfg_.filter.filter.validate();
    cfg_.filter.decay.validate();
    field_.prepare();
    if (!(std::isfinite(cfg_.sensor_noise_std) && cfg_.sensor_noise_std >= 0.0))
      throw std::invalid_argument("world: sensor noise std must be finite and >= 0");

    for (std::size_t i = 0; i < robots.size(); ++i) {
      for (std::size_t j = i + 1; j < robots.size(); ++j)
        if (robots[i].id == robots[j].id)
          throw std::invalid_argument("world: robot ids must be unique");
    }
    robots_.reserve(robots.size());
    for (std::size_t i = 0; i < robots.size(); ++i) {
      robot::RobotState st;
      st.id = robots[i].id;
      st.hyperparams = cfg_.start_hyperparams;
      if (robots[i].position.has_value()) {
        if (!cfg_.env.contains(*robots[i].position))
          throw std::invalid_argument("world: robot " + std::to_string(st.id) +
                                      " starts outside the environment");
        st.position = *robots[i].position;
      } else {
        auto engine = rng::make_engine(cfg_.seed, rng::Stream::init_position, i);
        st.position = rng::uniform_in_polygon(engine, cfg_.env.vertices());
      }
      robots_.push_back(std::move(st));
      sense_streams_.push_back(rng::make_engine(cfg_.seed, rng::Stream::sensing, i));
      waypoint_streams_.push_back(rng::make_engine(cfg_.seed, rng::Stream::waypoint, i));
    }

    // cached evaluation lattice over the environment, nodes inside Q only
    const geometry::BoundingBox box = cfg_.env.bbox();
    const double dx = (box.hi.x() - box.lo.x()) / cfg_.eval_grid;
    const double dy = (box.hi.y() - box.lo.y()) / cfg_.eval_grid;
    for (int iy = 0; iy < cfg_.eval_grid; ++iy) {
      for (int ix = 0; ix < cfg_.eval_grid; ++ix) {
        const Vec2 p(box.lo.x() + (ix + 0.5) * dx, box.lo.y() + (iy + 0.5) * dy);
        if (cfg_.env.contains(p)) eval_points_.push_back(p);
      }
    }
  }

  const WorldConfig& config() const { return cfg_; }
  const FieldProgram& field() const { return field_; }
  const std::vector<robot::RobotState>& robots() const { return robots_; }
  long tick() const { return tick_; }
  double time() const { return time_; }
  const std::vector<Vec2>& evaluation_points() const { return eval_points_; }
  const std::vector<std::pair<int, int>>& last_round_dataset_reads() const { return audit_; }

  double field_at(const Vec2& x, double t) const { return field_value(field_, cfg_.env, x, t); }

  std::vector<int> neighbors(int robot_id) const {
    const robot::RobotState* self = find(robot_id);
    if (self == nullptr) throw std::invalid_argument("world: unknown robot id");
    std::vector<int> out;
    for (const robot::RobotState& other : robots_) {
      if (other.id == robot_id) continue;
      if ((other.position - self->position).norm() <= cfg_.geom.sensing_radius())
        out.push_back(other.id);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Noisy point measurement at the robot's position, drawn from its own stream.
  gp::Sample sense(int robot_id) {
    for (std::size_t i = 0; i < robots_.size(); ++i)
      if (robots_[i].id == robot_id) return sense_at(i, robots_[i].position);
    throw std::invalid_argument("world: unknown robot id");
  }

  /// Runs one synchronous round: every robot computes against the previous round's
  /// snapshot, then all updates commit together and the clock advances.
  void step() {
    std::vector<robot::RobotSnapshot> snapshot;
    snapshot.reserve(robots_.size());
    for (const robot::RobotState& st : robots_)
      snapshot.push_back(robot::RobotSnapshot{st.id, st.position, st.dataset});
    audit_.clear();
    const robot::SnapshotBus bus(snapshot, &audit_);
    const double now = time_;

    std::vector<robot::RobotState> next;
    next.reserve(robots_.size());
    for (std::size_t i = 0; i < robots_.size(); ++i) {
      robot::TickContext ctx;
      ctx.env = &cfg_.env;
      ctx.geom = &cfg_.geom;
      ctx.control = cfg_.control;
      ctx.trade_off = cfg_.trade_off;
      ctx.filter = cfg_.filter;
      ctx.strategy = cfg_.strategy;
      ctx.cell_grid = cfg_.cell_grid;
      ctx.disk_segments = cfg_.disk_segments;
      ctx.mu_max_grid = eval_points_;
      ctx.now = now;
      ctx.tick = tick_;
      ctx.sensor = [this, i](const Vec2& where) { return sense_at(i, where); };
      ctx.true_field = [this, now](const Vec2& x) { return field_.value(x, now); };
      ctx.waypoint_engine = &waypoint_streams_[i];
      next.push_back(robot::robot_tick(robots_[i], bus, ctx));
    }
    robots_ = std::move(next);
    ++tick_;
    time_ = static_cast<double>(tick_) * cfg_.control.dt;
  }

  /// Metrics over the committed state: coverage objective against the true field,
  /// per-robot estimate RMSE, pairwise estimate deviation, dataset sizes and tick
  /// wall times, all in ascending robot id order.
  eval::MetricsRecord metrics() const {
    eval::MetricsRecord rec;
    rec.tick = tick_;
    rec.time_s = time_;
    const double t = time_;

    std::vector<std::size_t> order(robots_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [this](std::size_t a, std::size_t b) { return robots_[a].id < robots_[b].id; });

    std::vector<Vec2> positions;
    positions.reserve(robots_.size());
    for (std::size_t i : order) positions.push_back(robots_[i].position);
    rec.coverage_h = eval::coverage_objective(
        positions, cfg_.env, cfg_.geom, [&](const Vec2& x) { return field_.value(x, t); },
        cfg_.eval_grid, cfg_.disk_segments);

    std::vector<double> truth(eval_points_.size());
    double field_max = 0.0;
    for (std::size_t k = 0; k < eval_points_.size(); ++k) {
      truth[k] = field_.value(eval_points_[k], t);
      field_max = std::max(field_max, truth[k]);
    }

    std::vector<std::vector<double>> estimates;
    estimates.reserve(robots_.size());
    for (std::size_t i : order) {
      const robot::RobotState& st = robots_[i];
      std::vector<double> est(eval_points_.size(), 0.0);
      if (st.posterior != nullptr) {
        const Eigen::VectorXd mu = st.posterior->predict_mean(eval_points_);
        for (std::size_t k = 0; k < est.size(); ++k)
          est[k] = st.normalization.denormalize(mu[static_cast<Eigen::Index>(k)]);
      }
      rec.rmse.push_back(eval::rmse(est, truth));
      rec.dataset_sizes.push_back(static_cast<int>(st.dataset->size()));
      rec.tick_seconds.push_back(st.last_tick_seconds);
      estimates.push_back(std::move(est));
    }
    rec.deviation_pct =
        eval::pairwise_deviation(estimates, field_max, cfg_.filter.filter.mu_max_floor);
    return rec;
  }

  std::vector<int> robot_ids_sorted() const {
    std::vector<int> ids;
    ids.reserve(robots_.size());
    for (const robot::RobotState& st : robots_) ids.push_back(st.id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  const robot::RobotState* find(int robot_id) const {
    for (const robot::RobotState& st : robots_)
      if (st.id == robot_id) return &st;
    return nullptr;
  }

  gp::Sample sense_at(std::size_t robot_index, const Vec2& where) {
    std::normal_distribution<double> noise(0.0, 1.0);
    const double truth = field_value(field_, cfg_.env, where, time_);
    double value = truth;
    if (cfg_.sensor_noise_std > 0.0)
      value += cfg_.sensor_noise_std * noise(sense_streams_[robot_index]);
    gp::Sample s;
    s.location = where;
    s.value = value;
    s.timestamp = time_;
    s.source = robots_[robot_index].id;
    return s;
  }

  WorldConfig cfg_;
  FieldProgram field_;
  std::vector<robot::RobotState> robots_;
  std::vector<std::mt19937_64> sense_streams_;
  std::vector<std::mt19937_64> waypoint_streams_;
  long tick_ = 0;
  double time_ = 0.0;
  std::vector<Vec2> eval_points_;
  std::vector<std::pair<int, int>> audit_;
};

}  // namespace gpcov::world
