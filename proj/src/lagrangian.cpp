#include "cgrpo/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cgrpo {

std::vector<double> normalize_multipliers(std::span<const double> logits, double reward_logit) {
  double m = reward_logit;
  for (double z : logits) m = std::max(m, z);
  std::vector<double> lam;
  lam.reserve(logits.size() + 1);
  lam.push_back(std::exp(reward_logit - m));
  double sum = lam.back();
  for (double z : logits) {
    lam.push_back(std::exp(z - m));
    sum += lam.back();
  }
  for (double& v : lam) v /= sum;
  return lam;
}

MultiplierState::MultiplierState(std::vector<double> d, double init_logit, double lr)
    : logits(d.size(), init_logit), thresholds(std::move(d)), adam(thresholds.size(), lr) {
  for (double t : thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("MultiplierState: threshold outside [0, 1]");
  }
}

ViolationEstimate estimate_violations(std::span<const CostTally> batch) {
  if (batch.empty()) throw std::invalid_argument("estimate_violations: empty batch");
  const std::size_t k = batch.front().events.size();
  std::vector<std::int64_t> events(k, 0);
  ViolationEstimate v;
  for (const auto& t : batch) {
    if (t.events.size() != k) throw std::invalid_argument("estimate_violations: ragged cost channels");
    v.timesteps += t.timesteps;
    for (std::size_t c = 0; c < k; ++c) events[c] += t.events[c];
  }
  if (v.timesteps <= 0) throw std::invalid_argument("estimate_violations: no timesteps");
  for (std::int64_t e : events) v.rates.push_back(static_cast<double>(e) / static_cast<double>(v.timesteps));
  return v;
}

std::vector<double> multiplier_gradient(const MultiplierState& ms, const ViolationEstimate& v) {
  if (v.rates.size() != ms.num_constraints() || ms.thresholds.size() != ms.num_constraints()) {
    throw std::invalid_argument("multiplier_gradient: constraint count mismatch");
  }
  std::vector<double> g(ms.num_constraints());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = -(v.rates[k] - ms.thresholds[k]);
  return g;
}

void update_multipliers(MultiplierState& ms, const ViolationEstimate& v) {
  if (ms.num_constraints() == 0) return;
  const std::vector<double> g = multiplier_gradient(ms, v);
  adam_step(ms.logits, g, ms.adam);
}

}  // namespace cgrpo
