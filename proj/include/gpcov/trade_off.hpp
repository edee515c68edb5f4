#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gpcov::tradeoff {

struct TradeOffConfig {
  double alpha = 0.1;  // 1/seconds

  void validate() const {
    if (!(std::isfinite(alpha) && alpha > 0.0))
      throw std::invalid_argument("trade_off: alpha must be finite and > 0");
  }
};

/// Exploitation weight tanh(alpha * t): 0 at the start, saturating toward 1.
inline double weight(double t, const TradeOffConfig& cfg) {
  if (!(t >= 0.0)) throw std::invalid_argument("trade_off: time must be >= 0");
  return std::tanh(cfg.alpha * t);
}

/// Uncertainty-weighted substitute density e^beta - 1 with
/// beta = max(0, std + w * mean). Regions with no signal and no uncertainty
/// contribute exactly zero mass.
inline double substitute_density(double mean, double std_dev, double w) {
  const double beta = std::max(0.0, std_dev + w * mean);
  return std::expm1(beta);
}

}  // namespace gpcov::tradeoff
