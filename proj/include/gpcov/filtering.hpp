#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "gpcov/gp.hpp"

namespace gpcov::filtering {

struct FilterConfig {
  double e_add = 0.04;       // admission error margin
  double e_remove = 0.05;    // eviction error margin
  double z_score = 1.96;     // confidence z-score
  // Lower bound for the mean-estimate scale in the thresholds. It must keep the
  // eviction threshold above the irreducible per-sample deviation
  // sigma_f * sqrt(eps + sigma_n^2), or a low early estimate purges the whole
  // dataset: (e_remove / z_score) * floor > 0.0112 for the default kernel.
  double mu_max_floor = 0.5;
  bool enabled = true;

  void validate() const {
    if (!(e_add > 0.0 && e_add <= e_remove && e_remove < 1.0))
      throw std::invalid_argument(
          "filter: thresholds must satisfy 0 < e_add <= e_remove < 1 "
          "(a just-admitted sample must not be evicted immediately)");
    if (!(z_score > 0.0)) throw std::invalid_argument("filter: z_score must be > 0");
    if (!(mu_max_floor > 0.0))
      throw std::invalid_argument("filter: mu_max_floor must be > 0");
  }
};

/// Running min/max of raw measurements; the max never decreases and the min
/// never increases.
struct NormalizationState {
  double raw_min = std::numeric_limits<double>::infinity();
  double raw_max = -std::numeric_limits<double>::infinity();

  bool seeded() const { return raw_min <= raw_max; }

  void observe(double raw) {
    if (!std::isfinite(raw))
      throw std::invalid_argument("normalization: non-finite measurement");
    raw_min = std::min(raw_min, raw);
    raw_max = std::max(raw_max, raw);
  }

  double normalize(double raw) const {
    if (!seeded()) throw std::logic_error("normalization: no observations yet");
    const double span = raw_max - raw_min;
    if (span < 1e-12) return 0.5;
    return std::clamp((raw - raw_min) / span, 0.0, 1.0);
  }

  double denormalize(double unit) const {
    if (!seeded()) return 0.0;
    const double span = raw_max - raw_min;
    if (span < 1e-12) return raw_min;
    return raw_min + unit * span;
  }
};

inline double normalize(double raw, const NormalizationState& ns) { return ns.normalize(raw); }

/// Hyperparameters, decay setting and evaluation time shared by every GP query
/// inside one filter pass.
struct GpContext {
  gp::Hyperparams hyperparams;
  gp::DecayParams decay;
  double now = 0.0;
};

namespace detail {

struct SampleKey {
  std::int64_t qx, qy, qt;
  int source;
  bool operator==(const SampleKey&) const = default;
};

struct SampleKeyHash {
  std::size_t operator()(const SampleKey& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    const auto mix = [&h](std::uint64_t v) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(static_cast<std::uint64_t>(k.qx));
    mix(static_cast<std::uint64_t>(k.qy));
    mix(static_cast<std::uint64_t>(k.qt));
    mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(k.source)));
    return static_cast<std::size_t>(h);
  }
};

// Identity of a measurement: location to 1e-6 m, timestamp to 1e-3 s, source id.
inline SampleKey key_of(const gp::Sample& s) {
  return SampleKey{static_cast<std::int64_t>(std::llround(s.location.x() * 1e6)),
                   static_cast<std::int64_t>(std::llround(s.location.y() * 1e6)),
                   static_cast<std::int64_t>(std::llround(s.timestamp * 1e3)), s.source};
}

using KeySet = std::unordered_set<SampleKey, SampleKeyHash>;

inline KeySet key_set(const gp::Dataset& data) {
  KeySet keys;
  keys.reserve(data.size() * 2);
  for (const gp::Sample& s : data) keys.insert(key_of(s));
  return keys;
}

}  // namespace detail

/// Indices of the candidates whose predictive standard deviation against the
/// growing working set clears (e / z) * mu_max. Accepted candidates join the
/// working set before the next one is tested, so a flood of near-duplicates from
/// several neighbors cannot all pass. Candidates are processed in dataset order.
inline std::vector<std::size_t> filter_sample_indices(std::span<const gp::Sample> candidates,
                                                      double e, double z_score, double mu_max,
                                                      const gp::Dataset& base,
                                                      const GpContext& ctx) {
  const double threshold = (e / z_score) * mu_max;
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return gp::dataset_order_less(candidates[a], candidates[b]);
  });

  gp::Dataset working = base;
  gp::GpPosterior model(working, ctx.hyperparams, ctx.decay, ctx.now);
  std::vector<std::size_t> accepted;
  for (std::size_t idx : order) {
    const gp::Sample& c = candidates[idx];
    const auto [mean, variance] = model.predict_one(c.location);
    (void)mean;
    const double std_dev = std::sqrt(std::max(variance, 0.0));
    if (std_dev >= threshold - 1e-15) {
      accepted.push_back(idx);
      working.insert(std::upper_bound(working.begin(), working.end(), c,
                                      gp::dataset_order_less),
                     c);
      model = gp::GpPosterior(working, ctx.hyperparams, ctx.decay, ctx.now);
    }
  }
  std::sort(accepted.begin(), accepted.end());
  return accepted;
}

/// Same admission filter, returning the accepted samples themselves.
inline std::vector<gp::Sample> filter_samples(std::span<const gp::Sample> candidates, double e,
                                              double z_score, double mu_max,
                                              const gp::Dataset& base, const GpContext& ctx) {
  std::vector<gp::Sample> out;
  for (std::size_t idx : filter_sample_indices(candidates, e, z_score, mu_max, base, ctx))
    out.push_back(candidates[idx]);
  gp::sort_dataset(out);
  return out;
}

struct FilterTickConfig {
  FilterConfig filter;
  gp::DecayParams decay;
  gp::HyperBounds bounds;
  int retrain_every = 5;
  int retrain_budget = 100;
  int retrain_min_n = 8;         // refits on fewer samples swing the noise wildly
  int retrain_sample_cap = 400;  // skip hyperparameter refits beyond this size
};

struct FilterTickResult {
  gp::Dataset dataset;  // raw measurement values, sorted
  gp::Hyperparams hyperparams;
  NormalizationState normalization;
  double mu_max = 0.0;
  int admitted = 0;
  int evicted = 0;
  bool retrained = false;
};

namespace detail {

inline gp::Dataset normalized_copy(const gp::Dataset& data, const NormalizationState& ns) {
  gp::Dataset out = data;
  for (gp::Sample& s : out) s.value = ns.normalize(s.value);
  return out;
}

// Max of the posterior mean over the evaluation grid and the training locations;
// the peak of the estimate usually sits on a sample, which a coarse grid misses.
inline double mean_peak(const gp::GpPosterior& model, std::span<const Vec2> grid) {
  double peak = 0.0;
  if (!grid.empty()) peak = std::max(peak, model.predict_mean(grid).maxCoeff());
  if (!model.train().empty()) {
    std::vector<Vec2> locations;
    locations.reserve(model.train().size());
    for (const gp::Sample& s : model.train()) locations.push_back(s.location);
    peak = std::max(peak, model.predict_mean(locations).maxCoeff());
  }
  return peak;
}

}  // namespace detail

/// One dataset-maintenance round for a single robot: gather the fresh local sample
/// and the neighbor datasets, admission-filter them against the current data,
/// merge, refit hyperparameters on cadence, then drop every sample whose posterior
/// standard deviation at its own location has grown past the eviction threshold
/// (stale data stops pinning the estimate down as its decay factors shrink).
///
/// Stored sample values are raw measurements; they pass through the robot's
/// normalization state whenever a GP is built, so thresholds and mu_max live in
/// normalized units. Throws FactorizationError when the GP cannot be factorized;
/// callers treat that as "keep the previous dataset this tick".
inline FilterTickResult robot_filter_tick(
    const gp::Dataset& current, const gp::Sample& local_sample,
    std::span<const gp::DatasetPtr> neighbor_datasets, const FilterTickConfig& cfg,
    const gp::Hyperparams& hyperparams, const NormalizationState& normalization, double now,
    long tick, std::span<const Vec2> mu_max_grid) {
  cfg.filter.validate();
  FilterTickResult result;
  result.hyperparams = hyperparams;
  result.normalization = normalization;

  // collect candidates: own fresh sample plus every neighbor sample not already held
  std::vector<gp::Sample> candidates;
  candidates.push_back(local_sample);
  for (const gp::DatasetPtr& ds : neighbor_datasets) {
    if (!ds) continue;
    candidates.insert(candidates.end(), ds->begin(), ds->end());
  }
  for (const gp::Sample& s : candidates) {
    if (!std::isfinite(s.value) || !finite(s.location))
      throw std::invalid_argument("filter tick: non-finite candidate sample");
    if (s.timestamp < 0.0 || s.timestamp > now + 1e-9)
      throw std::invalid_argument("filter tick: candidate timestamp outside [0, now]");
    result.normalization.observe(s.value);
  }

  detail::KeySet seen = detail::key_set(current);
  std::vector<gp::Sample> fresh;
  fresh.reserve(candidates.size());
  for (const gp::Sample& s : candidates)
    if (seen.insert(detail::key_of(s)).second) fresh.push_back(s);
  gp::sort_dataset(fresh);

  const GpContext ctx{result.hyperparams, cfg.decay, now};
  const gp::Dataset base_norm = detail::normalized_copy(current, result.normalization);

  // scale of the estimated signal, floored so a near-zero early estimate cannot
  // zero out the thresholds; admission uses the estimate held before this tick
  double mu_max_admit = cfg.filter.mu_max_floor;
  if (cfg.filter.enabled && !current.empty()) {
    gp::GpPosterior model(base_norm, ctx.hyperparams, ctx.decay, now);
    mu_max_admit = std::max(cfg.filter.mu_max_floor, detail::mean_peak(model, mu_max_grid));
  }

  std::vector<gp::Sample> admitted_raw;
  if (cfg.filter.enabled) {
    gp::Dataset fresh_norm = fresh;
    for (gp::Sample& s : fresh_norm) s.value = result.normalization.normalize(s.value);
    for (std::size_t idx : filter_sample_indices(fresh_norm, cfg.filter.e_add,
                                                 cfg.filter.z_score, mu_max_admit, base_norm,
                                                 ctx))
      admitted_raw.push_back(fresh[idx]);
  } else {
    admitted_raw = fresh;
  }
  result.admitted = static_cast<int>(admitted_raw.size());
  result.mu_max = mu_max_admit;

  gp::Dataset merged = current;
  merged.insert(merged.end(), admitted_raw.begin(), admitted_raw.end());
  gp::sort_dataset(merged);

  if (tick % cfg.retrain_every == 0 &&
      merged.size() >= static_cast<std::size_t>(std::max(cfg.retrain_min_n, 2)) &&
      merged.size() <= static_cast<std::size_t>(cfg.retrain_sample_cap)) {
    const gp::Dataset merged_norm = detail::normalized_copy(merged, result.normalization);
    result.hyperparams = gp::optimize_hyperparams(merged_norm, result.hyperparams, cfg.decay,
                                                  now, cfg.bounds, cfg.retrain_budget);
    result.retrained = true;
  }

  if (cfg.filter.enabled && !merged.empty()) {
    const gp::Dataset merged_norm = detail::normalized_copy(merged, result.normalization);
    gp::GpPosterior model(merged_norm, result.hyperparams, cfg.decay, now);
    std::vector<Vec2> locations;
    locations.reserve(merged.size());
    for (const gp::Sample& s : merged) locations.push_back(s.location);
    Eigen::VectorXd mu, var;
    model.predict(locations, mu, var);
    // the cleanup threshold scales with the just-trained estimate, so a freshly
    // bootstrapped dataset is not purged while mu_max is still climbing
    const double mu_max_evict =
        std::max(cfg.filter.mu_max_floor, detail::mean_peak(model, mu_max_grid));
    result.mu_max = mu_max_evict;
    const double threshold = (cfg.filter.e_remove / cfg.filter.z_score) * mu_max_evict;
    // samples admitted this very tick are exempt: e_add <= e_remove is meant as a
    // hysteresis band, and the admission decision would otherwise be reversed
    // within the same round
    detail::KeySet just_admitted;
    for (const gp::Sample& s : admitted_raw) just_admitted.insert(detail::key_of(s));
    gp::Dataset kept;
    kept.reserve(merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
      const double std_dev = std::sqrt(std::max(var[static_cast<Eigen::Index>(i)], 0.0));
      if (std_dev >= threshold - 1e-15 && !just_admitted.contains(detail::key_of(merged[i])))
        ++result.evicted;
      else
        kept.push_back(merged[i]);
    }
    result.dataset = std::move(kept);
  } else {
    result.dataset = std::move(merged);
  }
  return result;
}

}  // namespace gpcov::filtering
