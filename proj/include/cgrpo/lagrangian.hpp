#ifndef CGRPO_LAGRANGIAN_HPP_
#define CGRPO_LAGRANGIAN_HPP_

#include "cgrpo/adam.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cgrpo {

/// Softmax over (a_R, z_1..z_K). Returns (lambda_R, lambda_1..lambda_K).
std::vector<double> normalize_multipliers(std::span<const double> logits, double reward_logit = 0.0);

/// Learned multipliers for K indicator-cost constraints.
struct MultiplierState {
  std::vector<double> logits;      // z_k
  double reward_logit = 0.0;       // a_R, fixed
  std::vector<double> thresholds;  // target behavior rates d_k in [0, 1]
  AdamState adam;

  MultiplierState() = default;
  MultiplierState(std::vector<double> thresholds, double init_logit, double lr);

  std::size_t num_constraints() const { return logits.size(); }
  std::vector<double> lambdas() const { return normalize_multipliers(logits, reward_logit); }
  bool operator==(const MultiplierState&) const = default;
};

/// Cost events of one trajectory: `events[k]` indicator hits over `timesteps`.
struct CostTally {
  std::int64_t timesteps = 0;
  std::vector<std::int64_t> events;
};

struct ViolationEstimate {
  std::vector<double> rates;  // J_k, flat mean over every logged timestep
  std::int64_t timesteps = 0;
};

/// Throws std::invalid_argument on an empty batch or zero total timesteps.
ViolationEstimate estimate_violations(std::span<const CostTally> batch);

/// Gradient of the multiplier loss w.r.t. each logit: -(J_k - d_k).
std::vector<double> multiplier_gradient(const MultiplierState& ms, const ViolationEstimate& v);

/// One Adam descent step on the logits. A violated constraint's logit
/// rises, a satisfied one's falls, and one exactly on threshold is left
/// alone (given zero moments).
void update_multipliers(MultiplierState& ms, const ViolationEstimate& v);

}  // namespace cgrpo

#endif  // CGRPO_LAGRANGIAN_HPP_
