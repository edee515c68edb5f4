#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpcov/evaluation.hpp"
#include "gpcov/filtering.hpp"
#include "gpcov/geometry.hpp"
#include "gpcov/gp.hpp"
#include "gpcov/robot.hpp"
#include "gpcov/trade_off.hpp"
#include "gpcov/world.hpp"

namespace gpcov::cli {

using nlohmann::json;

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& field, const std::string& why)
      : std::runtime_error("scenario: " + field + ": " + why) {}
};

/// Fully resolved experiment configuration; defaults applied, everything validated.
struct Scenario {
  geometry::Environment env;
  int robot_count = 1;
  std::vector<Vec2> robot_positions;  // empty means random placement
  double sensing_radius = 0.0;        // defaults to diameter / 3
  robot::ControlConfig control;
  tradeoff::TradeOffConfig trade_off;
  filtering::FilterConfig filter;
  gp::DecayParams decay;
  gp::Hyperparams gp_start;
  gp::HyperBounds gp_bounds;
  int retrain_every = 5;
  int retrain_budget = 100;
  int retrain_min_n = 8;
  int retrain_sample_cap = 400;
  world::FieldProgram field;
  std::string field_grid_path;  // set when the field came from a grid csv
  long ticks = 1;
  std::uint64_t seed = 1;
  eval::Strategy strategy = eval::Strategy::proposed;
  double sensor_noise_std = 0.005;
  int cell_grid = 40;
  int eval_grid = 60;
  int disk_segments = 32;
  std::vector<long> dump_ticks;
};

namespace detail {

inline const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ScenarioError(path.empty() ? key : path + "." + key, "missing");
  return j.at(key);
}

inline double num(const json& j, const std::string& field) {
  if (!j.is_number()) throw ScenarioError(field, "must be a number");
  return j.get<double>();
}

inline double num_or(const json& parent, const std::string& path, const char* key,
                     double fallback) {
  if (!parent.contains(key)) return fallback;
  return num(parent.at(key), path + "." + key);
}

inline long integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ScenarioError(field, "must be an integer");
  return j.get<long>();
}

inline Vec2 point(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2)
    throw ScenarioError(field, "must be a 2-element array [x, y]");
  return Vec2(num(j.at(0), field + "[0]"), num(j.at(1), field + "[1]"));
}

inline world::GaussComponent component(const json& j, const std::string& path) {
  world::GaussComponent c;
  c.weight = num_or(j, path, "weight", 1.0);
  c.weight_rate = num_or(j, path, "weight_rate", 0.0);
  c.center = point(require(j, path, "center"), path + ".center");
  if (j.contains("center_velocity"))
    c.center_velocity = point(j.at("center_velocity"), path + ".center_velocity");
  if (j.contains("cov")) {
    const json& m = j.at("cov");
    if (!m.is_array() || m.size() != 2 || !m.at(0).is_array() || m.at(0).size() != 2 ||
        !m.at(1).is_array() || m.at(1).size() != 2)
      throw ScenarioError(path + ".cov", "must be a 2x2 array");
    c.covariance << num(m.at(0).at(0), path + ".cov[0][0]"),
        num(m.at(0).at(1), path + ".cov[0][1]"), num(m.at(1).at(0), path + ".cov[1][0]"),
        num(m.at(1).at(1), path + ".cov[1][1]");
  }
  try {
    c.prepare();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(path, e.what());
  }
  return c;
}

inline std::vector<world::GaussComponent> component_list(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ScenarioError(path, "must be a non-empty array");
  std::vector<world::GaussComponent> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(component(j.at(i), path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

inline Scenario parse_scenario(const json& doc) {
  using detail::integer;
  using detail::num;
  using detail::num_or;
  using detail::point;
  using detail::require;

  Scenario sc;

  // environment
  {
    const json& envj = require(doc, "", "environment");
    const json& verts = require(envj, "environment", "vertices");
    if (!verts.is_array() || verts.size() < 3)
      throw ScenarioError("environment.vertices", "must be an array of at least 3 points");
    geometry::Polygon poly;
    for (std::size_t i = 0; i < verts.size(); ++i)
      poly.push_back(point(verts.at(i), "environment.vertices[" + std::to_string(i) + "]"));
    try {
      sc.env = geometry::Environment(poly);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("environment.vertices", e.what());
    }
  }
  const double diameter = sc.env.diameter();

  // robots
  {
    const json& rj = require(doc, "", "robots");
    sc.robot_count = static_cast<int>(integer(require(rj, "robots", "count"), "robots.count"));
    if (sc.robot_count < 1) throw ScenarioError("robots.count", "must be >= 1");
    if (rj.contains("positions") && !rj.at("positions").is_string()) {
      const json& pos = rj.at("positions");
      if (!pos.is_array())
        throw ScenarioError("robots.positions", "must be \"random\" or an array of points");
      for (std::size_t i = 0; i < pos.size(); ++i) {
        const Vec2 p = point(pos.at(i), "robots.positions[" + std::to_string(i) + "]");
        if (!sc.env.contains(p))
          throw ScenarioError("robots.positions[" + std::to_string(i) + "]",
                              "outside the environment");
        sc.robot_positions.push_back(p);
      }
      if (static_cast<int>(sc.robot_positions.size()) != sc.robot_count)
        throw ScenarioError("robots.positions", "length must equal robots.count");
    } else if (rj.contains("positions") && rj.at("positions").is_string() &&
               rj.at("positions").get<std::string>() != "random") {
      throw ScenarioError("robots.positions", "string value must be \"random\"");
    }
  }

  // sensing
  sc.sensing_radius = diameter / 3.0;
  if (doc.contains("sensing"))
    sc.sensing_radius = num_or(doc.at("sensing"), "sensing", "radius", sc.sensing_radius);
  if (!(sc.sensing_radius > 0.0)) throw ScenarioError("sensing.radius", "must be > 0");

  // control
  if (doc.contains("control")) {
    const json& cj = doc.at("control");
    sc.control.gain = num_or(cj, "control", "gain", sc.control.gain);
    sc.control.dt = num_or(cj, "control", "dt", sc.control.dt);
    sc.control.v_max = num_or(cj, "control", "v_max", sc.control.v_max);
  }
  try {
    sc.control.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("control", e.what());
  }

  // trade-off
  if (doc.contains("trade_off"))
    sc.trade_off.alpha = num_or(doc.at("trade_off"), "trade_off", "alpha", sc.trade_off.alpha);
  try {
    sc.trade_off.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("trade_off.alpha", e.what());
  }

  // filter
  if (doc.contains("filter")) {
    const json& fj = doc.at("filter");
    sc.filter.e_add = num_or(fj, "filter", "e_add", sc.filter.e_add);
    sc.filter.e_remove = num_or(fj, "filter", "e_remove", sc.filter.e_remove);
    sc.filter.z_score = num_or(fj, "filter", "z_score", sc.filter.z_score);
    sc.filter.mu_max_floor = num_or(fj, "filter", "mu_max_floor", sc.filter.mu_max_floor);
    if (fj.contains("enabled")) {
      if (!fj.at("enabled").is_boolean())
        throw ScenarioError("filter.enabled", "must be a boolean");
      sc.filter.enabled = fj.at("enabled").get<bool>();
    }
  }
  try {
    sc.filter.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("filter", e.what());
  }

  // decay
  if (doc.contains("decay")) {
    const json& dj = doc.at("decay");
    if (dj.contains("kind")) {
      const std::string kind = dj.at("kind").get<std::string>();
      if (kind == "exponential")
        sc.decay.kind = gp::DecayKind::exponential;
      else if (kind == "step")
        sc.decay.kind = gp::DecayKind::step;
      else
        throw ScenarioError("decay.kind", "must be \"exponential\" or \"step\"");
    }
    sc.decay.epsilon = num_or(dj, "decay", "epsilon", sc.decay.epsilon);
    sc.decay.tau = num_or(dj, "decay", "tau", sc.decay.tau);
    sc.decay.step_steepness = num_or(dj, "decay", "step_steepness", sc.decay.step_steepness);
    sc.decay.step_time = num_or(dj, "decay", "step_time", sc.decay.step_time);
  }
  try {
    sc.decay.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("decay", e.what());
  }

  // gp
  sc.gp_bounds = gp::HyperBounds::for_diameter(diameter);
  sc.gp_start = gp::Hyperparams{0.15 * diameter, 1.0, 0.005};
  if (doc.contains("gp")) {
    const json& gj = doc.at("gp");
    sc.gp_start.length_scale = num_or(gj, "gp", "length_scale", sc.gp_start.length_scale);
    sc.gp_start.signal_std = num_or(gj, "gp", "signal_std", sc.gp_start.signal_std);
    sc.gp_start.noise_std = num_or(gj, "gp", "noise_std", sc.gp_start.noise_std);
    const auto bounds_pair = [&](const char* key, double& lo_ref, double& hi_ref) {
      if (!gj.contains(key)) return;
      const json& b = gj.at(key);
      const std::string path = std::string("gp.") + key;
      if (!b.is_array() || b.size() != 2) throw ScenarioError(path, "must be [lo, hi]");
      const double lo = num(b.at(0), path + "[0]");
      const double hi = num(b.at(1), path + "[1]");
      if (!(lo > 0.0 && hi >= lo)) throw ScenarioError(path, "must satisfy 0 < lo <= hi");
      lo_ref = lo;
      hi_ref = hi;
    };
    bounds_pair("length_scale_bounds", sc.gp_bounds.length_scale_min,
                sc.gp_bounds.length_scale_max);
    bounds_pair("signal_std_bounds", sc.gp_bounds.signal_std_min, sc.gp_bounds.signal_std_max);
    bounds_pair("noise_std_bounds", sc.gp_bounds.noise_std_min, sc.gp_bounds.noise_std_max);
    if (gj.contains("retrain_every"))
      sc.retrain_every = static_cast<int>(integer(gj.at("retrain_every"), "gp.retrain_every"));
    if (gj.contains("retrain_budget"))
      sc.retrain_budget = static_cast<int>(integer(gj.at("retrain_budget"), "gp.retrain_budget"));
    if (gj.contains("retrain_min_n"))
      sc.retrain_min_n = static_cast<int>(integer(gj.at("retrain_min_n"), "gp.retrain_min_n"));
    if (gj.contains("retrain_sample_cap"))
      sc.retrain_sample_cap =
          static_cast<int>(integer(gj.at("retrain_sample_cap"), "gp.retrain_sample_cap"));
  }
  try {
    sc.gp_start.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("gp", e.what());
  }
  if (sc.retrain_every < 1) throw ScenarioError("gp.retrain_every", "must be >= 1");
  if (sc.retrain_budget < 0) throw ScenarioError("gp.retrain_budget", "must be >= 0");
  if (sc.retrain_min_n < 2) throw ScenarioError("gp.retrain_min_n", "must be >= 2");
  if (sc.retrain_sample_cap < 2) throw ScenarioError("gp.retrain_sample_cap", "must be >= 2");

  // field
  {
    const json& fj = require(doc, "", "field");
    const std::string kind = require(fj, "field", "kind").get<std::string>();
    if (kind == "gaussian_mixture") {
      sc.field.kind = world::FieldProgram::Kind::gaussian_mixture;
      sc.field.components =
          detail::component_list(require(fj, "field", "components"), "field.components");
      if (fj.contains("change_events")) {
        const json& evs = fj.at("change_events");
        if (!evs.is_array()) throw ScenarioError("field.change_events", "must be an array");
        for (std::size_t i = 0; i < evs.size(); ++i) {
          const std::string path = "field.change_events[" + std::to_string(i) + "]";
          world::ChangeEvent ev;
          ev.time = num(require(evs.at(i), path, "time"), path + ".time");
          ev.components =
              detail::component_list(require(evs.at(i), path, "components"), path + ".components");
          sc.field.change_events.push_back(std::move(ev));
        }
      }
    } else if (kind == "grid_csv") {
      sc.field.kind = world::FieldProgram::Kind::grid_csv;
      sc.field_grid_path = require(fj, "field", "path").get<std::string>();
      try {
        sc.field.grid = world::load_grid_csv(sc.field_grid_path);
      } catch (const std::invalid_argument& e) {
        throw ScenarioError("field.path", e.what());
      }
      for (const Vec2& v : sc.env.vertices())
        if (!sc.field.grid->covers(v))
          throw ScenarioError("field.path", "grid does not cover the environment");
    } else {
      throw ScenarioError("field.kind", "must be \"gaussian_mixture\" or \"grid_csv\"");
    }
    try {
      sc.field.prepare();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("field", e.what());
    }
  }

  // run parameters
  sc.ticks = integer(require(doc, "", "ticks"), "ticks");
  if (sc.ticks < 1) throw ScenarioError("ticks", "must be >= 1");
  if (doc.contains("seed")) {
    const long s = integer(doc.at("seed"), "seed");
    if (s < 0) throw ScenarioError("seed", "must be >= 0");
    sc.seed = static_cast<std::uint64_t>(s);
  }
  if (doc.contains("strategy")) {
    try {
      sc.strategy = eval::strategy_from_string(doc.at("strategy").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("strategy", e.what());
    }
  }
  if (doc.contains("sensor_noise_std")) {
    sc.sensor_noise_std = num(doc.at("sensor_noise_std"), "sensor_noise_std");
    if (!(sc.sensor_noise_std >= 0.0)) throw ScenarioError("sensor_noise_std", "must be >= 0");
  }
  if (doc.contains("grids")) {
    const json& gj = doc.at("grids");
    if (gj.contains("cell"))
      sc.cell_grid = static_cast<int>(integer(gj.at("cell"), "grids.cell"));
    if (gj.contains("evaluation"))
      sc.eval_grid = static_cast<int>(integer(gj.at("evaluation"), "grids.evaluation"));
    if (sc.cell_grid < 4) throw ScenarioError("grids.cell", "must be >= 4");
    if (sc.eval_grid < 4) throw ScenarioError("grids.evaluation", "must be >= 4");
  }
  if (doc.contains("disk_segments")) {
    sc.disk_segments = static_cast<int>(integer(doc.at("disk_segments"), "disk_segments"));
    if (sc.disk_segments < 8) throw ScenarioError("disk_segments", "must be >= 8");
  }
  if (doc.contains("dump_ticks")) {
    const json& dj = doc.at("dump_ticks");
    if (!dj.is_array()) throw ScenarioError("dump_ticks", "must be an array of ticks");
    for (std::size_t i = 0; i < dj.size(); ++i)
      sc.dump_ticks.push_back(integer(dj.at(i), "dump_ticks[" + std::to_string(i) + "]"));
  }
  return sc;
}

inline Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ScenarioError("document", std::string("invalid json: ") + e.what());
  }
  return parse_scenario(doc);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("document", "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

inline json scenario_to_json(const Scenario& sc) {
  json doc;
  json verts = json::array();
  for (const Vec2& v : sc.env.vertices()) verts.push_back({v.x(), v.y()});
  doc["environment"] = {{"vertices", verts}};
  json robots = {{"count", sc.robot_count}};
  if (sc.robot_positions.empty()) {
    robots["positions"] = "random";
  } else {
    json pos = json::array();
    for (const Vec2& p : sc.robot_positions) pos.push_back({p.x(), p.y()});
    robots["positions"] = pos;
  }
  doc["robots"] = robots;
  doc["sensing"] = {{"radius", sc.sensing_radius}};
  doc["control"] = {{"gain", sc.control.gain}, {"dt", sc.control.dt}, {"v_max", sc.control.v_max}};
  doc["trade_off"] = {{"alpha", sc.trade_off.alpha}};
  doc["filter"] = {{"e_add", sc.filter.e_add},
                   {"e_remove", sc.filter.e_remove},
                   {"z_score", sc.filter.z_score},
                   {"mu_max_floor", sc.filter.mu_max_floor},
                   {"enabled", sc.filter.enabled}};
  doc["decay"] = {{"kind", sc.decay.kind == gp::DecayKind::exponential ? "exponential" : "step"},
                  {"epsilon", sc.decay.epsilon},
                  {"tau", sc.decay.tau},
                  {"step_steepness", sc.decay.step_steepness},
                  {"step_time", sc.decay.step_time}};
  doc["gp"] = {{"length_scale", sc.gp_start.length_scale},
               {"signal_std", sc.gp_start.signal_std},
               {"noise_std", sc.gp_start.noise_std},
               {"length_scale_bounds",
                {sc.gp_bounds.length_scale_min, sc.gp_bounds.length_scale_max}},
               {"signal_std_bounds", {sc.gp_bounds.signal_std_min, sc.gp_bounds.signal_std_max}},
               {"noise_std_bounds", {sc.gp_bounds.noise_std_min, sc.gp_bounds.noise_std_max}},
               {"retrain_every", sc.retrain_every},
               {"retrain_budget", sc.retrain_budget},
               {"retrain_min_n", sc.retrain_min_n},
               {"retrain_sample_cap", sc.retrain_sample_cap}};
  if (sc.field.kind == world::FieldProgram::Kind::grid_csv) {
    doc["field"] = {{"kind", "grid_csv"}, {"path", sc.field_grid_path}};
  } else {
    const auto comp_json = [](const world::GaussComponent& c) {
      return json{{"weight", c.weight},
                  {"weight_rate", c.weight_rate},
                  {"center", {c.center.x(), c.center.y()}},
                  {"center_velocity", {c.center_velocity.x(), c.center_velocity.y()}},
                  {"cov",
                   {{c.covariance(0, 0), c.covariance(0, 1)},
                    {c.covariance(1, 0), c.covariance(1, 1)}}}};
    };
    json comps = json::array();
    for (const world::GaussComponent& c : sc.field.components) comps.push_back(comp_json(c));
    json field = {{"kind", "gaussian_mixture"}, {"components", comps}};
    if (!sc.field.change_events.empty()) {
      json evs = json::array();
      for (const world::ChangeEvent& ev : sc.field.change_events) {
        json cj = json::array();
        for (const world::GaussComponent& c : ev.components) cj.push_back(comp_json(c));
        evs.push_back({{"time", ev.time}, {"components", cj}});
      }
      field["change_events"] = evs;
    }
    doc["field"] = field;
  }
  doc["ticks"] = sc.ticks;
  doc["seed"] = sc.seed;
  doc["strategy"] = eval::to_string(sc.strategy);
  doc["sensor_noise_std"] = sc.sensor_noise_std;
  doc["grids"] = {{"cell", sc.cell_grid}, {"evaluation", sc.eval_grid}};
  doc["disk_segments"] = sc.disk_segments;
  doc["dump_ticks"] = sc.dump_ticks;
  return doc;
}

/// Builds the simulator for a scenario; robot ids are 0..count-1.
inline world::World make_world(const Scenario& sc) {
  world::WorldConfig cfg;
  cfg.env = sc.env;
  cfg.geom = geometry::SensingGeometry(sc.sensing_radius);
  cfg.control = sc.control;
  cfg.trade_off = sc.trade_off;
  cfg.filter.filter = sc.filter;
  cfg.filter.decay = sc.decay;
  cfg.filter.bounds = sc.gp_bounds;
  cfg.filter.retrain_every = sc.retrain_every;
  cfg.filter.retrain_budget = sc.retrain_budget;
  cfg.filter.retrain_min_n = sc.retrain_min_n;
  cfg.filter.retrain_sample_cap = sc.retrain_sample_cap;
  cfg.start_hyperparams = sc.gp_start;
  cfg.strategy = sc.strategy;
  cfg.sensor_noise_std = sc.sensor_noise_std;
  cfg.cell_grid = sc.cell_grid;
  cfg.eval_grid = sc.eval_grid;
  cfg.disk_segments = sc.disk_segments;
  cfg.seed = sc.seed;

  std::vector<world::RobotInit> inits;
  inits.reserve(static_cast<std::size_t>(sc.robot_count));
  for (int i = 0; i < sc.robot_count; ++i) {
    world::RobotInit init;
    init.id = i;
    if (!sc.robot_positions.empty()) init.position = sc.robot_positions[static_cast<std::size_t>(i)];
    inits.push_back(init);
  }
  return world::World(cfg, sc.field, inits);
}

}  // namespace gpcov::cli
