#include "cgrpo/policy_net.hpp"

#include <stdexcept>

namespace cgrpo::reference {

namespace {

double weight(const MlpParams& p, std::size_t block_offset, std::size_t cols, std::size_t in,
              std::size_t out) {
  return p.data()[block_offset + in * cols + out];
}

}  // namespace

void forward_batch(const MlpParams& p, std::span<const double> obs, Activations& act) {
  if (obs.size() % kObsDim != 0) throw std::invalid_argument("forward_batch: obs is not rows x 30");
  const std::size_t n = obs.size() / kObsDim;
  act.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = obs.data() + r * kObsDim;
    double* h1 = act.h1.data() + r * kHidden;
    double* h2 = act.h2.data() + r * kHidden;
    double* z = act.logits.data() + r * kNumActions;
    for (std::size_t j = 0; j < kHidden; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < kObsDim; ++k) s += weight(p, MlpParams::kW1, kHidden, k, j) * x[k];
      s += p.data()[MlpParams::kB1 + j];
      h1[j] = s > 0.0 ? s : 0.0;
    }
    for (std::size_t j = 0; j < kHidden; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < kHidden; ++k) s += weight(p, MlpParams::kW2, kHidden, k, j) * h1[k];
      s += p.data()[MlpParams::kB2 + j];
      h2[j] = s > 0.0 ? s : 0.0;
    }
    for (std::size_t j = 0; j < kNumActions; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < kHidden; ++k) s += weight(p, MlpParams::kW3, kNumActions, k, j) * h2[k];
      z[j] = s + p.data()[MlpParams::kB3 + j];
    }
  }
}

void backward_batch(const MlpParams& p, std::span<const double> obs, const Activations& act,
                    std::span<const double> dlogits, MlpParams& grad) {
  const std::size_t n = act.rows;
  if (obs.size() != n * kObsDim || dlogits.size() != n * kNumActions) {
    throw std::invalid_argument("backward_batch: row count mismatch");
  }
  grad.set_zero();
  double* g = grad.data();
  std::vector<double> dh2(kHidden), dh1(kHidden);
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = obs.data() + r * kObsDim;
    const double* h1 = act.h1.data() + r * kHidden;
    const double* h2 = act.h2.data() + r * kHidden;
    const double* dz = dlogits.data() + r * kNumActions;

    for (std::size_t j = 0; j < kNumActions; ++j) {
      g[MlpParams::kB3 + j] += dz[j];
      for (std::size_t k = 0; k < kHidden; ++k) g[MlpParams::kW3 + k * kNumActions + j] += h2[k] * dz[j];
    }
    for (std::size_t k = 0; k < kHidden; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < kNumActions; ++j) s += weight(p, MlpParams::kW3, kNumActions, k, j) * dz[j];
      dh2[k] = h2[k] > 0.0 ? s : 0.0;
    }
    for (std::size_t j = 0; j < kHidden; ++j) {
      g[MlpParams::kB2 + j] += dh2[j];
      for (std::size_t k = 0; k < kHidden; ++k) g[MlpParams::kW2 + k * kHidden + j] += h1[k] * dh2[j];
    }
    for (std::size_t k = 0; k < kHidden; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < kHidden; ++j) s += weight(p, MlpParams::kW2, kHidden, k, j) * dh2[j];
      dh1[k] = h1[k] > 0.0 ? s : 0.0;
    }
    for (std::size_t j = 0; j < kHidden; ++j) {
      g[MlpParams::kB1 + j] += dh1[j];
      for (std::size_t k = 0; k < kObsDim; ++k) g[MlpParams::kW1 + k * kHidden + j] += x[k] * dh1[j];
    }
  }
}

}  // namespace cgrpo::reference
