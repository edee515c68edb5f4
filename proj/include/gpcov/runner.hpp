#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gpcov/scenario.hpp"
#include "gpcov/world.hpp"

namespace gpcov::cli {

struct GridDump {
  long tick = 0;
  std::string name;
  world::GridField grid;
};

struct RunArtifacts {
  Scenario scenario;  // effective configuration the run used
  std::vector<eval::MetricsRecord> records;
  std::vector<GridDump> dumps;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// Square-cell lattice covering the environment bounding box for grid dumps.
struct DumpLattice {
  int ncols = 0;
  int nrows = 0;
  double cell = 1.0;
  Vec2 origin{0, 0};
  std::vector<Vec2> nodes;  // row-major, row 0 at minimum y
};

inline DumpLattice dump_lattice(const geometry::Environment& env, int grid_n) {
  const geometry::BoundingBox box = env.bbox();
  const double ex = box.hi.x() - box.lo.x();
  const double ey = box.hi.y() - box.lo.y();
  DumpLattice lat;
  lat.cell = std::max(ex, ey) / std::max(grid_n - 1, 1);
  lat.origin = box.lo;
  lat.ncols = static_cast<int>(std::floor(ex / lat.cell + 1e-9)) + 1;
  lat.nrows = static_cast<int>(std::floor(ey / lat.cell + 1e-9)) + 1;
  lat.nodes.reserve(static_cast<std::size_t>(lat.ncols) * static_cast<std::size_t>(lat.nrows));
  for (int r = 0; r < lat.nrows; ++r)
    for (int c = 0; c < lat.ncols; ++c)
      lat.nodes.emplace_back(lat.origin.x() + c * lat.cell, lat.origin.y() + r * lat.cell);
  return lat;
}

inline world::GridField make_grid(const DumpLattice& lat, const std::vector<double>& values) {
  std::vector<double> clamped = values;
  for (double& v : clamped) v = std::max(0.0, v);  // grid format is non-negative
  return world::GridField(lat.ncols, lat.nrows, lat.cell, lat.origin.x(), lat.origin.y(),
                          std::move(clamped));
}

}  // namespace detail

/// Executes the scenario tick by tick, collecting one metrics record per round and
/// grid dumps at the configured ticks.
inline RunArtifacts run(const Scenario& sc) {
  RunArtifacts art;
  art.scenario = sc;
  world::World w = make_world(sc);

  const detail::DumpLattice lattice =
      sc.dump_ticks.empty() ? detail::DumpLattice{} : detail::dump_lattice(sc.env, sc.eval_grid);

  for (long t = 0; t < sc.ticks; ++t) {
    w.step();
    art.records.push_back(w.metrics());
    if (std::find(sc.dump_ticks.begin(), sc.dump_ticks.end(), w.tick()) != sc.dump_ticks.end()) {
      std::vector<double> truth(lattice.nodes.size(), 0.0);
      for (std::size_t k = 0; k < lattice.nodes.size(); ++k)
        if (sc.env.contains(lattice.nodes[k]))
          truth[k] = w.field().value(lattice.nodes[k], w.time());
      art.dumps.push_back({w.tick(), "true_field_t" + std::to_string(w.tick()),
                           detail::make_grid(lattice, truth)});
      for (const robot::RobotState& st : w.robots()) {
        if (st.posterior == nullptr) continue;
        Eigen::VectorXd mu, var;
        st.posterior->predict(lattice.nodes, mu, var);
        std::vector<double> mean_grid(lattice.nodes.size(), 0.0);
        std::vector<double> std_grid(lattice.nodes.size(), 0.0);
        const double span = st.normalization.seeded()
                                ? std::max(st.normalization.raw_max - st.normalization.raw_min, 0.0)
                                : 0.0;
        for (std::size_t k = 0; k < lattice.nodes.size(); ++k) {
          const auto i = static_cast<Eigen::Index>(k);
          mean_grid[k] = st.normalization.denormalize(mu[i]);
          std_grid[k] = std::sqrt(std::max(var[i], 0.0)) * span;
        }
        const std::string suffix =
            "_robot" + std::to_string(st.id) + "_t" + std::to_string(w.tick());
        art.dumps.push_back({w.tick(), "mean" + suffix, detail::make_grid(lattice, mean_grid)});
        art.dumps.push_back({w.tick(), "std" + suffix, detail::make_grid(lattice, std_grid)});
      }
    }
  }
  return art;
}

inline json summarize(const RunArtifacts& art) {
  json s;
  s["strategy"] = eval::to_string(art.scenario.strategy);
  s["seed"] = art.scenario.seed;
  s["ticks"] = art.scenario.ticks;
  s["robots"] = art.scenario.robot_count;
  s["filter_enabled"] = art.scenario.filter.enabled;
  if (art.records.empty()) return s;

  const eval::MetricsRecord& last = art.records.back();
  const auto mean_of = [](const auto& v) {
    return v.empty() ? 0.0
                     : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  s["final"] = {{"h", last.coverage_h},
                {"mean_rmse", mean_of(last.rmse)},
                {"deviation_pct", last.deviation_pct},
                {"mean_dataset_size", mean_of(last.dataset_sizes)}};

  const std::size_t tail_start = art.records.size() - art.records.size() / 4 - 1;
  double h_tail = 0.0, rmse_tail = 0.0, size_tail = 0.0, tick_seconds = 0.0;
  std::size_t n_tail = 0;
  for (std::size_t i = tail_start; i < art.records.size(); ++i) {
    h_tail += art.records[i].coverage_h;
    rmse_tail += mean_of(art.records[i].rmse);
    size_tail += mean_of(art.records[i].dataset_sizes);
    ++n_tail;
  }
  for (const eval::MetricsRecord& r : art.records) tick_seconds += mean_of(r.tick_seconds);
  s["tail_mean"] = {{"h", h_tail / n_tail},
                    {"mean_rmse", rmse_tail / n_tail},
                    {"mean_dataset_size", size_tail / n_tail}};
  s["mean_tick_seconds"] = tick_seconds / static_cast<double>(art.records.size());
  return s;
}

inline void write_metrics_csv(const RunArtifacts& art, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit: cannot write " + path);
  out << "tick,time_s,H";
  for (int i = 0; i < art.scenario.robot_count; ++i) out << ",rmse_" << i;
  out << ",deviation_pct";
  for (int i = 0; i < art.scenario.robot_count; ++i) out << ",dsize_" << i;
  for (int i = 0; i < art.scenario.robot_count; ++i) out << ",ticktime_" << i;
  out << "\n";
  for (const eval::MetricsRecord& r : art.records) {
    out << r.tick << ',' << detail::fmt(r.time_s) << ',' << detail::fmt(r.coverage_h);
    for (double v : r.rmse) out << ',' << detail::fmt(v);
    out << ',' << detail::fmt(r.deviation_pct);
    for (int v : r.dataset_sizes) out << ',' << v;
    for (double v : r.tick_seconds) out << ',' << detail::fmt(v);
    out << "\n";
  }
}

/// Writes metrics.csv, summary.json, the effective scenario.json, and any grid
/// dumps into the output directory.
inline void emit(const RunArtifacts& art, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("emit: cannot create directory " + out_dir);

  write_metrics_csv(art, out_dir + "/metrics.csv");
  {
    std::ofstream out(out_dir + "/summary.json");
    if (!out) throw std::runtime_error("emit: cannot write " + out_dir + "/summary.json");
    out << summarize(art).dump(2) << "\n";
  }
  {
    std::ofstream out(out_dir + "/scenario.json");
    if (!out) throw std::runtime_error("emit: cannot write " + out_dir + "/scenario.json");
    out << scenario_to_json(art.scenario).dump(2) << "\n";
  }
  if (!art.dumps.empty()) {
    const std::string dump_dir = out_dir + "/dumps";
    fs::create_directories(dump_dir, ec);
    if (ec) throw std::runtime_error("emit: cannot create directory " + dump_dir);
    for (const GridDump& d : art.dumps) {
      std::ofstream out(dump_dir + "/" + d.name + ".csv");
      if (!out) throw std::runtime_error("emit: cannot write dump " + d.name);
      world::save_grid_csv(out, d.grid);
    }
  }
}

/// Runs the scenario once per (strategy, seed) pair; per-run outputs land in
/// out_dir/<strategy>/seed_<k>/ and the cross-run aggregates in summary.json.
inline json sweep(const Scenario& base, int seed_count,
                  const std::vector<eval::Strategy>& strategies, const std::string& out_dir) {
  if (seed_count < 1) throw std::invalid_argument("sweep: seed_count must be >= 1");
  json all_runs = json::array();
  json by_strategy;
  for (eval::Strategy strategy : strategies) {
    std::vector<double> final_h;
    std::vector<double> final_rmse;
    std::vector<double> final_dsize;
    for (int k = 0; k < seed_count; ++k) {
      Scenario sc = base;
      sc.strategy = strategy;
      sc.seed = base.seed + static_cast<std::uint64_t>(k);
      RunArtifacts art = run(sc);
      const std::string run_dir =
          out_dir + "/" + eval::to_string(strategy) + "/seed_" + std::to_string(sc.seed);
      emit(art, run_dir);
      json s = summarize(art);
      final_h.push_back(s["final"]["h"].get<double>());
      final_rmse.push_back(s["final"]["mean_rmse"].get<double>());
      final_dsize.push_back(s["final"]["mean_dataset_size"].get<double>());
      all_runs.push_back(std::move(s));
    }
    const auto mean = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    const auto stderr_of = [&](const std::vector<double>& v) {
      if (v.size() < 2) return 0.0;
      const double m = mean(v);
      double acc = 0.0;
      for (double x : v) acc += (x - m) * (x - m);
      return std::sqrt(acc / static_cast<double>(v.size() - 1) /
                       static_cast<double>(v.size()));
    };
    by_strategy[eval::to_string(strategy)] = {{"mean_final_h", mean(final_h)},
                                              {"stderr_final_h", stderr_of(final_h)},
                                              {"mean_final_rmse", mean(final_rmse)},
                                              {"mean_final_dataset_size", mean(final_dsize)},
                                              {"runs", seed_count}};
  }
  json summary = {{"seeds", seed_count}, {"by_strategy", by_strategy}, {"runs", all_runs}};
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream out(out_dir + "/summary.json");
  if (!out) throw std::runtime_error("sweep: cannot write " + out_dir + "/summary.json");
  out << summary.dump(2) << "\n";
  return summary;
}

/// One-dimensional staleness demonstration: six samples taken left to right at
/// ten-second intervals, posterior evaluated at t = 60 s with and without time
/// decay. Emits the curves and the sample set as csv.
inline void demo_1d(const std::string& out_dir, double epsilon = 1e-4, double tau = 1e2) {
  gp::Hyperparams hp{1.0, 1.0, 1e-4};
  gp::DecayParams decay;
  decay.epsilon = epsilon;
  decay.tau = tau;
  const gp::DecayParams identity = gp::DecayParams::identity();
  const double now = 60.0;

  const auto signal = [](double x) { return 0.5 + 0.4 * std::sin(0.8 * x); };
  gp::Dataset train;
  for (int i = 0; i < 6; ++i) {
    gp::Sample s;
    const double x = 2.0 + 1.6 * i;
    s.location = Vec2(x, 0.0);
    s.value = signal(x);
    s.timestamp = 10.0 * (i + 1);
    s.source = 0;
    train.push_back(s);
  }

  std::vector<Vec2> queries;
  for (int k = 0; k <= 240; ++k) queries.emplace_back(12.0 * k / 240.0, 0.0);

  const auto [mean_tv, var_tv] = gp::posterior(train, hp, decay, now, queries);
  const auto [mean_ti, var_ti] = gp::posterior(train, hp, identity, now, queries);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("demo-1d: cannot create directory " + out_dir);
  {
    std::ofstream out(out_dir + "/demo1d.csv");
    if (!out) throw std::runtime_error("demo-1d: cannot write demo1d.csv");
    out << "x,truth,mean_decay,std_decay,mean_identity,std_identity\n";
    for (std::size_t k = 0; k < queries.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      out << detail::fmt(queries[k].x()) << ',' << detail::fmt(signal(queries[k].x())) << ','
          << detail::fmt(mean_tv[i]) << ','
          << detail::fmt(std::sqrt(std::max(var_tv[i], 0.0))) << ',' << detail::fmt(mean_ti[i])
          << ',' << detail::fmt(std::sqrt(std::max(var_ti[i], 0.0))) << "\n";
    }
  }
  {
    std::ofstream out(out_dir + "/demo1d_samples.csv");
    if (!out) throw std::runtime_error("demo-1d: cannot write demo1d_samples.csv");
    out << "x,value,timestamp\n";
    for (const gp::Sample& s : train)
      out << detail::fmt(s.location.x()) << ',' << detail::fmt(s.value) << ','
          << detail::fmt(s.timestamp) << "\n";
  }
}

}  // namespace gpcov::cli
