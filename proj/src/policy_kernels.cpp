// OpenMP kernels for the policy MLP. The serial textbook versions live in
// policy_reference.cpp.

#include "cgrpo/policy_net.hpp"

#include <algorithm>
#include <stdexcept>

namespace cgrpo {

namespace {

constexpr std::size_t H = kHidden;
constexpr std::size_t A = kNumActions;
constexpr std::size_t D = kObsDim;

// out[j] += s * w[j] over a contiguous row; the loop is over j so it
// vectorizes without reassociating any sum.
inline void axpy(double* __restrict out, double s, const double* __restrict w, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) out[j] += s * w[j];
}

inline void forward_row(const double* __restrict p, const double* __restrict x, double* __restrict h1,
                        double* __restrict h2, double* __restrict logits) {
  const double* w1 = p + MlpParams::kW1;
  const double* w2 = p + MlpParams::kW2;
  const double* w3 = p + MlpParams::kW3;

  std::copy_n(p + MlpParams::kB1, H, h1);
  for (std::size_t k = 0; k < D; ++k) {
    if (x[k] != 0.0) axpy(h1, x[k], w1 + k * H, H);
  }
  for (std::size_t j = 0; j < H; ++j) h1[j] = h1[j] > 0.0 ? h1[j] : 0.0;

  std::copy_n(p + MlpParams::kB2, H, h2);
  for (std::size_t k = 0; k < H; ++k) {
    if (h1[k] != 0.0) axpy(h2, h1[k], w2 + k * H, H);
  }
  for (std::size_t j = 0; j < H; ++j) h2[j] = h2[j] > 0.0 ? h2[j] : 0.0;

  std::copy_n(p + MlpParams::kB3, A, logits);
  for (std::size_t k = 0; k < H; ++k) {
    if (h2[k] != 0.0) axpy(logits, h2[k], w3 + k * A, A);
  }
}

// Accumulates one chunk of rows into g (zeroed by the caller).
void backward_chunk(const double* __restrict p, const double* __restrict w2t, const double* obs,
                    const Activations& act, const double* dlogits, std::size_t r0, std::size_t r1,
                    double* __restrict g) {
  const double* w3 = p + MlpParams::kW3;
  double dh2[H];
  double dh1[H];
  for (std::size_t r = r0; r < r1; ++r) {
    const double* x = obs + r * D;
    const double* h1 = act.h1.data() + r * H;
    const double* h2 = act.h2.data() + r * H;
    const double* dl = dlogits + r * A;

    axpy(g + MlpParams::kB3, 1.0, dl, A);
    for (std::size_t k = 0; k < H; ++k) {
      if (h2[k] > 0.0) {
        axpy(g + MlpParams::kW3 + k * A, h2[k], dl, A);
        double s = 0.0;
        for (std::size_t j = 0; j < A; ++j) s += w3[k * A + j] * dl[j];
        dh2[k] = s;
      } else {
        dh2[k] = 0.0;
      }
    }

    axpy(g + MlpParams::kB2, 1.0, dh2, H);
    std::fill_n(dh1, H, 0.0);
    for (std::size_t k = 0; k < H; ++k) {
      if (h1[k] > 0.0) axpy(g + MlpParams::kW2 + k * H, h1[k], dh2, H);
    }
    for (std::size_t j = 0; j < H; ++j) {
      if (dh2[j] != 0.0) axpy(dh1, dh2[j], w2t + j * H, H);
    }
    for (std::size_t k = 0; k < H; ++k) {
      if (!(h1[k] > 0.0)) dh1[k] = 0.0;
    }

    axpy(g + MlpParams::kB1, 1.0, dh1, H);
    for (std::size_t k = 0; k < D; ++k) {
      if (x[k] != 0.0) axpy(g + MlpParams::kW1 + k * H, x[k], dh1, H);
    }
  }
}

}  // namespace

void forward_batch(const MlpParams& params, std::span<const double> obs, Activations& act) {
  if (obs.size() % D != 0) throw std::invalid_argument("forward_batch: obs is not rows x 30");
  const std::size_t n = obs.size() / D;
  act.resize(n);
  const double* p = params.data();
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    forward_row(p, obs.data() + i * D, act.h1.data() + i * H, act.h2.data() + i * H,
                act.logits.data() + i * A);
  }
}

void backward_batch(const MlpParams& params, std::span<const double> obs, const Activations& act,
                    std::span<const double> dlogits, MlpParams& grad) {
  const std::size_t n = act.rows;
  if (obs.size() != n * D || dlogits.size() != n * A) {
    throw std::invalid_argument("backward_batch: row count mismatch");
  }
  const double* p = params.data();

  // Output-major copy of W2 so dh1 is also an axpy.
  std::vector<double> w2t(H * H);
  for (std::size_t k = 0; k < H; ++k) {
    for (std::size_t j = 0; j < H; ++j) w2t[j * H + k] = p[MlpParams::kW2 + k * H + j];
  }

  const std::size_t chunks = (n + kBackwardChunkRows - 1) / kBackwardChunkRows;
  std::vector<double> partial(chunks * MlpParams::kSize, 0.0);
  const auto nchunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < nchunks; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const std::size_t r0 = ci * kBackwardChunkRows;
    const std::size_t r1 = std::min(n, r0 + kBackwardChunkRows);
    backward_chunk(p, w2t.data(), obs.data(), act, dlogits.data(), r0, r1,
                   partial.data() + ci * MlpParams::kSize);
  }

  grad.set_zero();
  double* g = grad.data();
  for (std::size_t c = 0; c < chunks; ++c) {
    axpy(g, 1.0, partial.data() + c * MlpParams::kSize, MlpParams::kSize);
  }
}

}  // namespace cgrpo
