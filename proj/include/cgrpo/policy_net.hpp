#ifndef CGRPO_POLICY_NET_HPP_
#define CGRPO_POLICY_NET_HPP_

#include "cgrpo/gridworld.hpp"
#include "cgrpo/rng.hpp"

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace cgrpo {

inline constexpr int kHidden = 128;

using Logits = std::array<double, kNumActions>;

/// One parameter tensor inside the flat vector. Weight blocks are stored
/// input-major: element (in, out) lives at offset + in * cols + out.
struct ParamBlock {
  std::string_view name;
  std::size_t offset;
  std::size_t rows;  // fan-in (1 for biases)
  std::size_t cols;  // fan-out
  std::size_t size() const { return rows * cols; }
};

/// Parameters of the 30 -> 128 -> 128 -> 5 ReLU MLP in one contiguous
/// vector (gradients use the same type).
class MlpParams {
 public:
  static constexpr std::size_t kW1 = 0;
  static constexpr std::size_t kB1 = kW1 + std::size_t{kObsDim} * kHidden;
  static constexpr std::size_t kW2 = kB1 + kHidden;
  static constexpr std::size_t kB2 = kW2 + std::size_t{kHidden} * kHidden;
  static constexpr std::size_t kW3 = kB2 + kHidden;
  static constexpr std::size_t kB3 = kW3 + std::size_t{kHidden} * kNumActions;
  static constexpr std::size_t kSize = kB3 + kNumActions;

  MlpParams() : data_(kSize, 0.0) {}

  /// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
  /// weights and biases alike.
  static MlpParams init(std::uint64_t seed);

  static std::span<const ParamBlock> blocks();

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  void set_zero();
  bool operator==(const MlpParams&) const = default;

 private:
  std::vector<double> data_;
};

/// Name of the first block holding a NaN/Inf, if any.
std::optional<std::string_view> first_nonfinite_block(const MlpParams& p);

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-row activations kept for the backward pass.
struct Activations {
  std::size_t rows = 0;
  std::vector<double> h1;      // rows x kHidden, post-ReLU
  std::vector<double> h2;      // rows x kHidden, post-ReLU
  std::vector<double> logits;  // rows x kNumActions

  void resize(std::size_t n);
  std::span<const double, kNumActions> row_logits(std::size_t r) const {
    return std::span<const double, kNumActions>(logits.data() + r * kNumActions, kNumActions);
  }
};

Logits forward_logits(const MlpParams& p, std::span<const double, kObsDim> obs);

/// Forward pass over `obs` (rows x kObsDim, row-major). Each row is computed
/// independently with a fixed summation order, so a row's logits are
/// bit-identical no matter which batch it is evaluated in.
void forward_batch(const MlpParams& p, std::span<const double> obs, Activations& act);

/// Gradient of sum_r dlogits[r] . logits[r] with respect to the parameters.
/// Rows are processed in fixed-size chunks (OpenMP-parallel) and the chunk
/// partials are summed in chunk order, so the result does not depend on the
/// thread count. `grad` is overwritten.
void backward_batch(const MlpParams& p, std::span<const double> obs, const Activations& act,
                    std::span<const double> dlogits, MlpParams& grad);

inline constexpr std::size_t kBackwardChunkRows = 64;

/// Serial textbook implementations of the same kernels; kept for testing
/// and benchmarking the parallel path.
namespace reference {
void forward_batch(const MlpParams& p, std::span<const double> obs, Activations& act);
void backward_batch(const MlpParams& p, std::span<const double> obs, const Activations& act,
                    std::span<const double> dlogits, MlpParams& grad);
}  // namespace reference

Logits softmax(std::span<const double, kNumActions> logits);

struct LogProbEntropy {
  double log_prob = 0.0;
  double entropy = 0.0;
};

LogProbEntropy log_prob_and_entropy(std::span<const double, kNumActions> logits, Action action);

Action sample_action(std::span<const double, kNumActions> logits, Rng& rng);

/// Versioned binary dump: magic, version, per-block (name, rows, cols)
/// header, then raw IEEE-754 doubles (little-endian hosts only).
void save_params(std::ostream& os, const MlpParams& p);
MlpParams load_params(std::istream& is);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cgrpo

#endif  // CGRPO_POLICY_NET_HPP_
