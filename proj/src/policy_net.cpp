#include "cgrpo/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace cgrpo {

namespace {

constexpr std::array<ParamBlock, 6> kBlocks{{
    {"W1", MlpParams::kW1, kObsDim, kHidden},
    {"b1", MlpParams::kB1, 1, kHidden},
    {"W2", MlpParams::kW2, kHidden, kHidden},
    {"b2", MlpParams::kB2, 1, kHidden},
    {"W3", MlpParams::kW3, kHidden, kNumActions},
    {"b3", MlpParams::kB3, 1, kNumActions},
}};

constexpr char kMagic[8] = {'C', 'G', 'R', 'P', 'O', 'M', 'L', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CheckpointError("checkpoint truncated");
  return v;
}

}  // namespace

std::span<const ParamBlock> MlpParams::blocks() { return kBlocks; }

MlpParams MlpParams::init(std::uint64_t seed) {
  MlpParams p;
  Rng rng(seed);
  // Each bias shares its layer's fan-in.
  const auto fill = [&](const ParamBlock& b, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < b.size(); ++i) p.data_[b.offset + i] = rng.uniform(-bound, bound);
  };
  fill(kBlocks[0], kObsDim);
  fill(kBlocks[1], kObsDim);
  fill(kBlocks[2], kHidden);
  fill(kBlocks[3], kHidden);
  fill(kBlocks[4], kHidden);
  fill(kBlocks[5], kHidden);
  return p;
}

void MlpParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

std::optional<std::string_view> first_nonfinite_block(const MlpParams& p) {
  for (const auto& b : kBlocks) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!std::isfinite(p.data()[b.offset + i])) return b.name;
    }
  }
  return std::nullopt;
}

void Activations::resize(std::size_t n) {
  rows = n;
  h1.resize(n * kHidden);
  h2.resize(n * kHidden);
  logits.resize(n * kNumActions);
}

Logits forward_logits(const MlpParams& p, std::span<const double, kObsDim> obs) {
  Activations act;
  forward_batch(p, std::span<const double>(obs.data(), obs.size()), act);
  Logits out;
  std::copy_n(act.logits.begin(), kNumActions, out.begin());
  for (double v : out) {
    if (!std::isfinite(v)) throw NonFiniteError("forward_logits: non-finite logit");
  }
  return out;
}

Logits softmax(std::span<const double, kNumActions> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  Logits p;
  double sum = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    p[a] = std::exp(logits[a] - m);
    sum += p[a];
  }
  for (double& v : p) v /= sum;
  return p;
}

LogProbEntropy log_prob_and_entropy(std::span<const double, kNumActions> logits, Action action) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double log_z = m + std::log(sum);
  LogProbEntropy out;
  out.log_prob = logits[static_cast<std::size_t>(action)] - log_z;
  for (double z : logits) {
    const double lp = z - log_z;
    out.entropy -= std::exp(lp) * lp;
  }
  return out;
}

Action sample_action(std::span<const double, kNumActions> logits, Rng& rng) {
  const Logits p = softmax(logits);
  const double u = rng.uniform01();
  double cum = 0.0;
  for (int a = 0; a < kNumActions - 1; ++a) {
    cum += p[a];
    if (u < cum) return static_cast<Action>(a);
  }
  return static_cast<Action>(kNumActions - 1);
}

void save_params(std::ostream& os, const MlpParams& p) {
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kFormatVersion);
  write_pod(os, static_cast<std::uint32_t>(kBlocks.size()));
  for (const auto& b : kBlocks) {
    write_pod(os, static_cast<std::uint32_t>(b.name.size()));
    os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    write_pod(os, static_cast<std::uint64_t>(b.rows));
    write_pod(os, static_cast<std::uint64_t>(b.cols));
  }
  write_pod(os, static_cast<std::uint64_t>(p.size()));
  os.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
  if (!os) throw CheckpointError("failed writing parameters");
}

MlpParams load_params(std::istream& is) {
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a parameter dump (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kFormatVersion) {
    throw CheckpointError("unsupported parameter dump version " + std::to_string(version));
  }
  const auto nblocks = read_pod<std::uint32_t>(is);
  if (nblocks != kBlocks.size()) throw CheckpointError("unexpected block count");
  for (const auto& b : kBlocks) {
    const auto len = read_pod<std::uint32_t>(is);
    if (len > 64) throw CheckpointError("corrupt block header");
    std::string name(len, '\0');
    is.read(name.data(), len);
    const auto rows = read_pod<std::uint64_t>(is);
    const auto cols = read_pod<std::uint64_t>(is);
    if (!is || name != b.name || rows != b.rows || cols != b.cols) {
      throw CheckpointError("shape mismatch in block " + std::string(b.name));
    }
  }
  const auto count = read_pod<std::uint64_t>(is);
  if (count != MlpParams::kSize) throw CheckpointError("parameter count mismatch");
  MlpParams p;
  is.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
  if (!is) throw CheckpointError("checkpoint truncated");
  return p;
}

}  // namespace cgrpo
