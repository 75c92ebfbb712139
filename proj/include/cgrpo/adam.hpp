#ifndef CGRPO_ADAM_HPP_
#define CGRPO_ADAM_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace cgrpo {

/// Adam moments and hyperparameters for a flat parameter vector.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t size, double learning_rate)
      : first_moment(size, 0.0), second_moment(size, 0.0), lr(learning_rate) {}

  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam step (descent): params -= lr * mhat / (sqrt(vhat) + eps).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace cgrpo

#endif  // CGRPO_ADAM_HPP_
