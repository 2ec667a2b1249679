#include "psopt/radius.hpp"

#include <algorithm>
#include <limits>

namespace psopt {

void RadiusConfig::validate() const {
  if (!(theta1 > 0.0 && theta1 < theta2 && theta2 < 1.0 && 1.0 < theta3 && theta3 < theta4) ||
      !std::isfinite(theta4)) {
    throw ConfigError("radius multipliers must satisfy 0 < theta1 < theta2 < 1 < theta3 < theta4");
  }
  if (!(mu1 > 0.0 && mu1 < mu2 && mu2 < 1.0)) {
    throw ConfigError("score thresholds must satisfy 0 < mu1 < mu2 < 1");
  }
}

double cancellation_ratio(const std::vector<double>& model_reductions) {
  double negative = 0.0;
  double nonnegative = 0.0;
  for (double dm : model_reductions) {
    if (dm < 0.0) {
      negative += dm;
    } else {
      nonnegative += dm;
    }
  }
  if (nonnegative <= 0.0) return 0.0;
  return negative / nonnegative;
}

double reduction_ratio(double actual, double predicted) {
  if (predicted != 0.0) return actual / predicted;
  if (actual == 0.0) return 1.0;
  return actual > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

IterationScore score(const std::vector<double>& model_reductions, const std::vector<double>& actual_reductions,
                     const std::vector<double>& ratios, double model_reduction, double ratio,
                     const std::vector<double>& radii, double rho, const RadiusConfig& config) {
  const std::size_t q = model_reductions.size();
  if (actual_reductions.size() != q || ratios.size() != q || radii.size() != q) {
    throw ContractError("score: per-element lists must have equal length");
  }
  if (q == 0) throw ContractError("score: no elements");

  IterationScore out;
  out.model_reductions = model_reductions;
  out.actual_reductions = actual_reductions;
  out.ratios = ratios;
  out.model_reduction = model_reduction;
  out.ratio = ratio;
  double df_total = 0.0;
  for (double df : actual_reductions) df_total += df;
  out.actual_reduction = df_total;

  const double zeta = cancellation_ratio(model_reductions);
  out.zeta = zeta;
  const double mu[2] = {config.mu1, config.mu2};
  for (int j = 0; j < 2; ++j) {
    out.eta[j] = -(1.0 - mu[j]) * zeta;
    out.alpha[j] = ((mu[j] + out.eta[j]) * (1.0 + zeta) - 2.0 * zeta) / (1.0 - zeta);
  }

  if (ratio >= config.mu2) {
    out.global = 2;
  } else if (ratio >= config.mu1) {
    out.global = 1;
  } else {
    out.global = 0;
  }

  const double share = model_reduction / static_cast<double>(q);
  out.local.assign(q, 0);
  out.total.assign(q, 0);
  for (std::size_t i = 0; i < q; ++i) {
    const double dm = model_reductions[i];
    const double df = actual_reductions[i];
    const double ri = ratios[i];
    auto passes = [&](int j) {
      const bool offset_test = df >= dm - out.eta[j] * share;
      if (dm >= 0.0) return ri >= out.alpha[j] || offset_test;
      return ri <= 2.0 - out.alpha[j] || offset_test;
    };
    int local = 0;
    if (passes(1)) {
      local = 2;
    } else if (passes(0)) {
      local = 1;
    }
    out.local[i] = local;
    out.total[i] = local + out.global;
  }

  if (out.global == 0) {
    bool some_decrease = false;
    std::ptrdiff_t lowest = -1;
    for (std::size_t i = 0; i < q; ++i) {
      if (!(radii[i] > rho)) continue;
      if (out.total[i] <= 1) {
        some_decrease = true;
        break;
      }
      if (lowest < 0 || out.total[i] < out.total[static_cast<std::size_t>(lowest)]) {
        lowest = static_cast<std::ptrdiff_t>(i);
      }
    }
    if (!some_decrease && lowest >= 0) {
      out.total[static_cast<std::size_t>(lowest)] = 0;
      out.forced = lowest;
    }
  }
  return out;
}

std::vector<double> update_radii(const IterationScore& score, const std::vector<double>& radii,
                                 const std::vector<double>& step_norms, double rho, const RadiusConfig& config) {
  const std::size_t q = radii.size();
  if (score.total.size() != q || step_norms.size() != q) {
    throw ContractError("update_radii: per-element lists must have equal length");
  }
  std::vector<double> out(q);
  for (std::size_t i = 0; i < q; ++i) {
    const double delta = radii[i];
    double next = delta;
    switch (score.total[i]) {
      case 4:
        next = step_norms[i] >= 0.5 * delta ? config.theta4 * delta : delta;
        break;
      case 3:
        next = step_norms[i] >= 0.5 * delta ? config.theta3 * delta : delta;
        break;
      case 2:
        next = delta;
        break;
      case 1:
        next = config.theta2 * delta;
        break;
      default:
        next = config.theta1 * delta;
        break;
    }
    out[i] = std::max(next, rho);
  }
  return out;
}

}  // namespace psopt
