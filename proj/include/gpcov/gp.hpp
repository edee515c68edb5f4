#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gpcov/geometry.hpp"

namespace gpcov::gp {

/// One timestamped scalar measurement, the atom of all training data.
struct Sample {
  Vec2 location = Vec2::Zero();
  double value = 0.0;
  double timestamp = 0.0;  // seconds since scenario start
  int source = 0;          // robot id that produced the measurement
};

using Dataset = std::vector<Sample>;
using DatasetPtr = std::shared_ptr<const Dataset>;

/// Canonical dataset order: ascending timestamp, ties broken by lexicographic
/// location and then source id. The index-based forgetting matrices depend on
/// this order; breaking ties by location keeps it invariant under robot id
/// relabeling.
inline bool dataset_order_less(const Sample& a, const Sample& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  if (a.location.x() != b.location.x()) return a.location.x() < b.location.x();
  if (a.location.y() != b.location.y()) return a.location.y() < b.location.y();
  return a.source < b.source;
}

inline void sort_dataset(Dataset& data) {
  std::stable_sort(data.begin(), data.end(), dataset_order_less);
}

inline bool is_sorted_dataset(const Dataset& data) {
  return std::is_sorted(data.begin(), data.end(),
                        [](const Sample& a, const Sample& b) { return a.timestamp < b.timestamp; });
}

struct Hyperparams {
  double length_scale = 1.0;  // meters
  double signal_std = 1.0;    // normalized field units
  double noise_std = 0.1;     // normalized field units

  void validate() const {
    if (!(std::isfinite(length_scale) && length_scale > 0.0))
      throw std::invalid_argument("hyperparams: length_scale must be finite and > 0");
    if (!(std::isfinite(signal_std) && signal_std > 0.0))
      throw std::invalid_argument("hyperparams: signal_std must be finite and > 0");
    if (!(std::isfinite(noise_std) && noise_std > 0.0))
      throw std::invalid_argument("hyperparams: noise_std must be finite and > 0");
  }
};

struct HyperBounds {
  double length_scale_min = 1e-3;
  double length_scale_max = 1e3;
  double signal_std_min = 1e-3;
  double signal_std_max = 10.0;
  double noise_std_min = 1e-4;
  double noise_std_max = 1.0;

  /// Length-scale window tied to the environment size, keeping tiny datasets from
  /// collapsing the kernel.
  static HyperBounds for_diameter(double diameter) {
    HyperBounds b;
    b.length_scale_min = 0.02 * diameter;
    b.length_scale_max = diameter;
    return b;
  }

  Hyperparams clamp(Hyperparams hp) const {
    hp.length_scale = std::clamp(hp.length_scale, length_scale_min, length_scale_max);
    hp.signal_std = std::clamp(hp.signal_std, signal_std_min, signal_std_max);
    hp.noise_std = std::clamp(hp.noise_std, noise_std_min, noise_std_max);
    return hp;
  }

  Hyperparams log_midpoint() const {
    return Hyperparams{std::sqrt(length_scale_min * length_scale_max),
                       std::sqrt(signal_std_min * signal_std_max),
                       std::sqrt(noise_std_min * noise_std_max)};
  }
};

enum class DecayKind { exponential, step };

struct DecayParams {
  DecayKind kind = DecayKind::exponential;
  double epsilon = 1e-4;       // index-distance forgetting, in [0, 1)
  double tau = 1e5;            // exponential decay time constant, seconds
  double step_steepness = 1.0; // 1/seconds, step kind only
  double step_time = 0.0;      // seconds, step kind only

  static DecayParams identity() {
    return DecayParams{DecayKind::exponential, 0.0, std::numeric_limits<double>::infinity(), 1.0,
                       0.0};
  }

  void validate() const {
    if (!(epsilon >= 0.0 && epsilon < 1.0))
      throw std::invalid_argument("decay: epsilon must lie in [0, 1)");
    if (!(tau > 0.0)) throw std::invalid_argument("decay: tau must be > 0");
    if (kind == DecayKind::step) {
      if (!(step_steepness > 0.0))
        throw std::invalid_argument("decay: step_steepness must be > 0");
      if (!(step_time >= 0.0)) throw std::invalid_argument("decay: step_time must be >= 0");
    }
  }
};

/// Attenuation of a sample aged dt seconds, in (0, 1].
inline double time_decay(double dt, const DecayParams& dp) {
  if (dp.kind == DecayKind::exponential) return std::exp(-dt / dp.tau);
  return 1.0 - 1.0 / (1.0 + std::exp(-dp.step_steepness * (dt - dp.step_time)));
}

inline double se_kernel(const Vec2& x, const Vec2& y, const Hyperparams& hp) {
  const double d2 = (x - y).squaredNorm();
  return hp.signal_std * hp.signal_std *
         std::exp(-d2 / (2.0 * hp.length_scale * hp.length_scale));
}

struct DecayMatrices {
  Eigen::MatrixXd sample_link;  // (1-eps)^(|i-j|/2) between training samples
  Eigen::VectorXd query_link;   // (1-eps)^((N+1-i)/2) toward a fresh query
  Eigen::VectorXd time_factors; // per-sample time decay at the evaluation time
  Eigen::MatrixXd time_link;    // pairwise time factors, unit diagonal
};

inline DecayMatrices decay_matrices(std::span<const double> timestamps, double now,
                                    const DecayParams& dp) {
  const auto n = static_cast<Eigen::Index>(timestamps.size());
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    if (timestamps[i] > timestamps[i + 1])
      throw std::invalid_argument("decay_matrices: timestamps must be sorted ascending");
  if (n > 0 && now < timestamps[n - 1] - 1e-9)
    throw std::invalid_argument("decay_matrices: evaluation time precedes newest sample");

  DecayMatrices m;
  m.sample_link.resize(n, n);
  m.query_link.resize(n);
  m.time_factors.resize(n);
  m.time_link.resize(n, n);
  const double base = 1.0 - dp.epsilon;
  for (Eigen::Index i = 0; i < n; ++i) {
    m.time_factors[i] = time_decay(now - timestamps[i], dp);
    m.query_link[i] = std::pow(base, 0.5 * static_cast<double>(n - i));  // 1-based (N+1-i)/2
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      m.sample_link(i, j) = std::pow(base, 0.5 * std::abs(static_cast<double>(i - j)));
      m.time_link(i, j) = (i == j) ? 1.0 : m.time_factors[i] * m.time_factors[j];
    }
  }
  return m;
}

/// Thrown when the regularized training covariance stays indefinite through the
/// whole jitter escalation.
class FactorizationError : public std::runtime_error {
 public:
  explicit FactorizationError(double attempted_jitter)
      : std::runtime_error("gp: covariance factorization failed, attempted jitter up to " +
                           std::to_string(attempted_jitter)),
        attempted_jitter_(attempted_jitter) {}
  double attempted_jitter() const { return attempted_jitter_; }

 private:
  double attempted_jitter_;
};

namespace detail {

/// Decayed training covariance without the noise term:
/// se_kernel o sample_link o time_link (unit decay on the diagonal).
inline Eigen::MatrixXd decayed_gram(const Dataset& train, const Hyperparams& hp,
                                    const DecayParams& dp, double now) {
  const auto n = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd k(n, n);
  std::vector<double> tf(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    tf[static_cast<std::size_t>(i)] = time_decay(now - train[static_cast<std::size_t>(i)].timestamp, dp);
  const double base = 1.0 - dp.epsilon;
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = hp.signal_std * hp.signal_std;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double se = se_kernel(train[static_cast<std::size_t>(i)].location,
                                  train[static_cast<std::size_t>(j)].location, hp);
      const double link = std::pow(base, 0.5 * static_cast<double>(i - j));
      const double v = se * link * tf[static_cast<std::size_t>(i)] * tf[static_cast<std::size_t>(j)];
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

/// Decayed cross covariance between one query column per point and the training set.
inline Eigen::MatrixXd decayed_cross(const Dataset& train, const Hyperparams& hp,
                                     const DecayParams& dp, double now,
                                     std::span<const Vec2> queries) {
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto m = static_cast<Eigen::Index>(queries.size());
  Eigen::MatrixXd kx(n, m);
  const double base = 1.0 - dp.epsilon;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double factor = std::pow(base, 0.5 * static_cast<double>(n - i)) *
                          time_decay(now - train[ui].timestamp, dp);
    for (Eigen::Index j = 0; j < m; ++j)
      kx(i, j) = factor * se_kernel(queries[static_cast<std::size_t>(j)], train[ui].location, hp);
  }
  return kx;
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

/// Cholesky of gram + (noise^2 + jitter) I, escalating jitter from 1e-12*sf^2
/// to 1e-6*sf^2 in decade steps.
inline Factorization factorize(const Eigen::MatrixXd& gram, const Hyperparams& hp) {
  const double sf2 = hp.signal_std * hp.signal_std;
  const double noise2 = hp.noise_std * hp.noise_std;
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd k = gram;
    k.diagonal().array() += noise2 + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() == Eigen::Success) return {std::move(llt), jitter};
    if (jitter >= 1e-6 * sf2) throw FactorizationError(jitter);
    jitter = (jitter == 0.0) ? 1e-12 * sf2 : jitter * 10.0;
  }
}

}  // namespace detail

/// Immutable time-decayed posterior over a training set at one evaluation time.
class GpPosterior {
 public:
  GpPosterior(Dataset train, Hyperparams hp, DecayParams dp, double now)
      : train_(std::make_shared<Dataset>(std::move(train))), hp_(hp), dp_(dp), now_(now) {
    hp_.validate();
    dp_.validate();
    if (!is_sorted_dataset(*train_))
      throw std::invalid_argument("gp: dataset timestamps must be sorted ascending");
    for (const Sample& s : *train_)
      if (!finite(s.location) || !std::isfinite(s.value) || !std::isfinite(s.timestamp))
        throw std::invalid_argument("gp: dataset contains non-finite sample");
    const auto n = static_cast<Eigen::Index>(train_->size());
    if (n == 0) return;
    if (now_ < (*train_)[train_->size() - 1].timestamp - 1e-9)
      throw std::invalid_argument("gp: evaluation time precedes newest sample");
    auto fact = detail::factorize(detail::decayed_gram(*train_, hp_, dp_, now_), hp_);
    jitter_ = fact.jitter;
    chol_ = std::move(fact.llt);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = (*train_)[static_cast<std::size_t>(i)].value;
    alpha_ = chol_.solve(y);
  }

  std::size_t size() const { return train_->size(); }
  const Dataset& train() const { return *train_; }
  const Hyperparams& hyperparams() const { return hp_; }
  const DecayParams& decay() const { return dp_; }
  double evaluation_time() const { return now_; }
  double jitter() const { return jitter_; }

  void predict(std::span<const Vec2> queries, Eigen::VectorXd& means,
               Eigen::VectorXd& variances) const {
    const auto m = static_cast<Eigen::Index>(queries.size());
    for (const Vec2& q : queries)
      if (!finite(q)) throw std::invalid_argument("gp: non-finite query point");
    means.resize(m);
    variances.resize(m);
    const double sf2 = hp_.signal_std * hp_.signal_std;
    if (train_->empty()) {
      means.setZero();
      variances.setConstant(sf2);
      return;
    }
    Eigen::MatrixXd kx = detail::decayed_cross(*train_, hp_, dp_, now_, queries);
    means = kx.transpose() * alpha_;
    chol_.matrixL().solveInPlace(kx);
    variances = (sf2 - kx.colwise().squaredNorm().array()).matrix();
  }

  Eigen::VectorXd predict_mean(std::span<const Vec2> queries) const {
    if (train_->empty()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(queries.size()));
    return detail::decayed_cross(*train_, hp_, dp_, now_, queries).transpose() * alpha_;
  }

  std::pair<double, double> predict_one(const Vec2& query) const {
    Eigen::VectorXd mu, var;
    predict(std::span<const Vec2>(&query, 1), mu, var);
    return {mu[0], var[0]};
  }

 private:
  DatasetPtr train_;
  Hyperparams hp_;
  DecayParams dp_;
  double now_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

/// Posterior means and variances at the query points.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> posterior(const Dataset& train,
                                                             const Hyperparams& hp,
                                                             const DecayParams& dp, double now,
                                                             std::span<const Vec2> queries) {
  GpPosterior model(train, hp, dp, now);
  Eigen::VectorXd mu, var;
  model.predict(queries, mu, var);
  return {std::move(mu), std::move(var)};
}

struct LogMarginal {
  double value = 0.0;
  Eigen::Vector3d grad_log = Eigen::Vector3d::Zero();  // d/d(log ls, log sf, log sn)
};

inline LogMarginal log_marginal_likelihood(const Dataset& train, const Hyperparams& hp,
                                           const DecayParams& dp, double now) {
  hp.validate();
  dp.validate();
  if (train.empty()) throw std::invalid_argument("log_marginal_likelihood: empty dataset");
  if (!is_sorted_dataset(train))
    throw std::invalid_argument("log_marginal_likelihood: dataset must be sorted");
  const auto n = static_cast<Eigen::Index>(train.size());

  const Eigen::MatrixXd gram = detail::decayed_gram(train, hp, dp, now);
  auto fact = detail::factorize(gram, hp);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = train[static_cast<std::size_t>(i)].value;
  const Eigen::VectorXd alpha = fact.llt.solve(y);

  LogMarginal out;
  const double log_det =
      2.0 * fact.llt.matrixLLT().diagonal().array().log().sum();
  out.value = -0.5 * y.dot(alpha) - 0.5 * log_det -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  // d(lml)/d(theta) = 0.5 * tr((alpha alpha^T - K^-1) dK/dtheta), theta in log space
  const Eigen::MatrixXd kinv =
      fact.llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd a = alpha * alpha.transpose() - kinv;

  const double inv_ls2 = 1.0 / (hp.length_scale * hp.length_scale);
  double g_ls = 0.0;
  double g_sf = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d2 = (train[static_cast<std::size_t>(i)].location -
                         train[static_cast<std::size_t>(j)].location)
                            .squaredNorm();
      g_ls += a(i, j) * gram(i, j) * d2 * inv_ls2;
      g_sf += a(i, j) * gram(i, j);
    }
  }
  out.grad_log[0] = 0.5 * g_ls;
  out.grad_log[1] = g_sf;  // dK/d(log sf) = 2 * gram
  out.grad_log[2] = hp.noise_std * hp.noise_std * a.trace();
  return out;
}

/// Projected gradient ascent on the log marginal likelihood in log-parameter space,
/// restarted from the given start and the mid-bounds point. Deterministic; never
/// returns hyperparameters with a lower likelihood than the (clamped) start.
inline Hyperparams optimize_hyperparams(const Dataset& train, const Hyperparams& start,
                                        const DecayParams& dp, double now,
                                        const HyperBounds& bounds, int budget = 100) {
  if (train.size() < 2 || budget <= 0) return start;

  using Vec3 = Eigen::Vector3d;
  const auto to_log = [](const Hyperparams& hp) {
    return Vec3(std::log(hp.length_scale), std::log(hp.signal_std), std::log(hp.noise_std));
  };
  const auto from_log = [](const Vec3& z) {
    return Hyperparams{std::exp(z[0]), std::exp(z[1]), std::exp(z[2])};
  };
  const Vec3 lo = to_log(Hyperparams{bounds.length_scale_min, bounds.signal_std_min,
                                     bounds.noise_std_min});
  const Vec3 hi = to_log(Hyperparams{bounds.length_scale_max, bounds.signal_std_max,
                                     bounds.noise_std_max});
  const auto clamp = [&](Vec3 z) {
    for (int i = 0; i < 3; ++i) z[i] = std::clamp(z[i], lo[i], hi[i]);
    return z;
  };

  int evals = 0;
  const auto evaluate = [&](const Vec3& z) -> std::optional<LogMarginal> {
    if (evals >= budget) return std::nullopt;
    ++evals;
    try {
      return log_marginal_likelihood(train, from_log(z), dp, now);
    } catch (const FactorizationError&) {
      return std::nullopt;
    }
  };

  const Vec3 z_start = clamp(to_log(start));
  const Vec3 z_mid = to_log(bounds.log_midpoint());

  double best_value = -std::numeric_limits<double>::infinity();
  Vec3 best_z = z_start;
  bool any_success = false;

  for (const Vec3& z0 : {z_start, z_mid}) {
    auto current = evaluate(z0);
    if (!current) continue;
    any_success = true;
    Vec3 z = z0;
    while (evals < budget) {
      if (current->grad_log.norm() < 1e-5) break;
      double step = 1.0;
      bool accepted = false;
      while (evals < budget && step >= 1e-8) {
        const Vec3 zt = clamp(z + step * current->grad_log);
        const Vec3 dz = zt - z;
        if (dz.norm() < 1e-14) break;  // pinned at the bounds
        auto trial = evaluate(zt);
        if (trial && trial->value > current->value + 1e-4 * current->grad_log.dot(dz)) {
          z = zt;
          current = trial;
          accepted = true;
          break;
        }
        step *= 0.25;
      }
      if (!accepted) break;
    }
    if (current->value > best_value) {
      best_value = current->value;
      best_z = z;
    }
  }
  if (!any_success) return start;
  return bounds.clamp(from_log(best_z));  // exp/log round trips can overshoot by one ulp
}

}  // namespace gpcov::gp
