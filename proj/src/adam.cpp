#include "cgrpo/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace cgrpo {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (params.size() != grads.size() || params.size() != s.first_moment.size() ||
      params.size() != s.second_moment.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.first_moment[i] = s.beta1 * s.first_moment[i] + (1.0 - s.beta1) * g;
    s.second_moment[i] = s.beta2 * s.second_moment[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.first_moment[i] / c1;
    const double vhat = s.second_moment[i] / c2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace cgrpo
