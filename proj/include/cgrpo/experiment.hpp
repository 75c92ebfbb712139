#ifndef CGRPO_EXPERIMENT_HPP_
#define CGRPO_EXPERIMENT_HPP_

#include "cgrpo/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cgrpo {

/// Invalid experiment spec; the message names the field.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class RunKind { Single, Sweep, Constrained };

/// (d_lava, d_battery); nullopt leaves that channel unconstrained.
using ThresholdPair = std::array<std::optional<double>, kNumCosts>;

struct ExperimentSpec {
  static constexpr int kVersion = 1;

  int version = kVersion;
  RunKind kind = RunKind::Single;
  std::string preset = "none";
  std::vector<AdvantageMode> modes = {AdvantageMode::ScalarizedAdvantages};
  std::vector<double> lambda_lava = {0.0};
  std::vector<double> lambda_battery = {0.0};
  std::vector<ThresholdPair> thresholds;  // empty: fixed-weight cells
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  int checkpoint_every = 100;
  /// Hyperparameters shared by every cell; fixed_lambda, thresholds and
  /// seed are filled in per cell.
  TrainConfig train;

  bool operator==(const ExperimentSpec& other) const;
  /// Throws SpecError.
  void validate() const;
};

/// Preset names: none, paper-fig2, paper-fig3, paper-fig4, paper-fig5.
void apply_preset(ExperimentSpec& spec, std::string_view preset);

/// Flat `key = value` text, one key per line, `#` comments. The preset (if
/// any) is applied first and explicit keys override it; unknown keys,
/// duplicate keys and malformed values raise SpecError.
ExperimentSpec parse_spec(std::string_view text);
ExperimentSpec load_spec(const std::filesystem::path& path);
std::string serialize_spec(const ExperimentSpec& spec);

/// One (config point, seed) training run.
struct RunCell {
  std::string name;
  TrainConfig config;
};

std::vector<RunCell> enumerate_cells(const ExperimentSpec& spec);

/// SHA-1 of "blob <len>\0<content>", as git computes object ids.
std::string git_blob_hash(std::string_view content);

std::string manifest_text(const ExperimentSpec& spec);

struct EvalReport {
  std::uint64_t seed = 0;
  int episodes = 0;
  double goal_rate = 0.0;
  double lava_rate = 0.0;     // per step
  double battery_rate = 0.0;  // per step
  double mean_episode_len = 0.0;
  bool operator==(const EvalReport&) const = default;
};

/// Stochastic rollouts of `policy` on fresh layouts drawn from the Eval
/// domain of `seed`.
EvalReport evaluate_policy(const MlpParams& policy, const GridConfig& grid, int episodes, std::uint64_t seed);

/// Accepts a trainer checkpoint or a bare parameter dump.
MlpParams load_policy(const std::filesystem::path& path);

/// One-row CSV; `cell` (may be null) adds the mode and weights/thresholds
/// the policy was trained with so plots need nothing but CSVs.
void write_eval_csv(const std::filesystem::path& path, const EvalReport& r, const RunCell* cell = nullptr);
EvalReport read_eval_csv(const std::filesystem::path& path);

struct RunOptions {
  std::filesystem::path out_dir;
  int workers = 1;
  bool resume = false;
  bool quiet = false;
};

/// Trains and evaluates every cell of `spec` under out_dir, writes
/// manifest.txt and summary.csv. Cells with an eval.csv are skipped on
/// resume; unfinished ones restart from their last checkpoint.
void run_experiment(const ExperimentSpec& spec, const RunOptions& opts);

/// Aggregates every cell's eval.csv into summary.csv (mean, std, stderr).
void write_summary(const std::filesystem::path& run_dir);

struct TheoremReport {
  double example_sigma_rs = 0.0;
  std::vector<double> example_weights;
  bool example_ok = false;

  int groups = 0;
  int degenerate_groups = 0;
  double max_identity_residual = 0.0;
  double max_self_consistency_residual = 0.0;
  double max_mean_abs = 0.0;  // largest |mean| of any advantage vector

  int scale_checks = 0;
  int scale_checked_screw = 0;
  double max_scadv_change = 0.0;
  double min_screw_change = 0.0;  // over checks where a change is required
  int scale_failures = 0;

  bool ok = false;
  std::string text() const;
};

/// Worked two-component example plus Monte Carlo checks of the
/// scalarized-reward expansion A = sum_j e_j Z_j and of the scale
/// sensitivity contrast between the two advantage constructions.
TheoremReport verify_theorem(int samples, std::uint64_t seed);

}  // namespace cgrpo

#endif  // CGRPO_EXPERIMENT_HPP_
