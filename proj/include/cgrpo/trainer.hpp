#ifndef CGRPO_TRAINER_HPP_
#define CGRPO_TRAINER_HPP_

#include "cgrpo/adam.hpp"
#include "cgrpo/gridworld.hpp"
#include "cgrpo/group_advantage.hpp"
#include "cgrpo/lagrangian.hpp"
#include "cgrpo/policy_net.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cgrpo {

/// Cost channels of the gridworld, in component order after the reward.
enum CostChannel : std::size_t { kLava = 0, kBattery = 1, kNumCosts = 2 };

/// How a trajectory's per-step cost indicators become its cost return.
enum class CostReturn { Sum, Rate };

struct LossConfig {
  double clip_eps = 0.2;
  double entropy_coef = 0.001;
  double kl_coef = 0.0;  // KL to the initial policy; off for the gridworld
};

struct TrainConfig {
  GridConfig grid;
  int updates = 8000;
  int groups = 8;
  int group_size = 8;
  int epochs = 2;
  int minibatch_timesteps = 2048;
  LossConfig loss;
  double policy_lr = 5e-4;
  double multiplier_lr = 1e-2;
  double multiplier_init_logit = 0.02;
  AdvantageMode mode = AdvantageMode::ScalarizedAdvantages;
  /// Fixed-weight run: (lambda_lava, lambda_battery); lambda_R = 1.
  std::optional<std::array<double, kNumCosts>> fixed_lambda;
  /// Constrained run: target rate per channel; nullopt leaves a channel
  /// unconstrained (lambda = 0).
  std::optional<std::array<std::optional<double>, kNumCosts>> thresholds;
  bool shared_layouts = true;
  CostReturn cost_return = CostReturn::Sum;
  int eval_episodes = 1000;
  std::uint64_t seed = 0;

  int episodes_per_update() const { return groups * group_size; }
  bool constrained() const { return thresholds.has_value(); }
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// One episode as seen by the learner.
struct Trajectory {
  std::vector<double> obs;  // length x kObsDim, observation before each action
  std::vector<Action> actions;
  std::vector<double> log_probs;  // log pi_old(a_t | s_t)
  std::vector<std::uint8_t> cost_lava;
  std::vector<std::uint8_t> cost_battery;
  std::vector<Cell> positions;  // post-move cell of each step
  double reward_return = 0.0;
  bool reached_goal = false;

  std::size_t length() const { return actions.size(); }
  std::int64_t events(CostChannel c) const;
  bool operator==(const Trajectory&) const = default;
};

struct GroupBatch {
  std::vector<std::uint64_t> layout_seeds;    // per member
  std::vector<std::uint64_t> sampling_seeds;  // per member
  std::vector<Trajectory> members;
  bool operator==(const GroupBatch&) const = default;
};

/// Runs one episode per (layout seed, sampling seed) pair under `snapshot`.
/// Members advance in lockstep so each step is one batched forward pass.
GroupBatch collect_group(const GridWorld& world, const MlpParams& snapshot,
                         std::span<const std::uint64_t> layout_seeds,
                         std::span<const std::uint64_t> sampling_seeds);

/// Seeds for group `group` of update `update`; with shared layouts every
/// member starts from the same episode configuration.
void group_seeds(std::uint64_t master, std::int64_t update, int group, int group_size, bool shared,
                 std::vector<std::uint64_t>& layout, std::vector<std::uint64_t>& sampling);

/// Groups plus their timesteps flattened for minibatching.
struct RolloutBatch {
  std::vector<GroupBatch> groups;

  std::vector<double> obs;  // timesteps x kObsDim
  std::vector<int> actions;
  std::vector<double> log_prob_old;
  std::vector<double> log_prob_ref;  // filled only when a KL term is used
  std::vector<double> advantage;
  std::vector<int> group_id;
  std::vector<int> traj_id;

  std::size_t timesteps() const { return actions.size(); }
  void flatten();
};

ComponentReturns component_returns(const GroupBatch& group, CostReturn how);

struct AdvantageDiagnostics {
  std::array<double, 1 + kNumCosts> effective_weights{};  // mean over defined groups, NaN if none
  double sigma_rs_mean = 0.0;                               // NaN if every group is degenerate
  int defined_groups = 0;
  std::vector<EffectiveWeights> per_group;
};

/// Fills batch.advantage (one A_i broadcast over trajectory i's timesteps).
/// `lambdas` = (lambda_R, lambda_lava, lambda_battery).
AdvantageDiagnostics compute_advantages(RolloutBatch& batch, AdvantageMode mode,
                                        std::span<const double> lambdas, CostReturn how);

struct TimestepView {
  std::span<const double> obs;
  std::span<const int> actions;
  std::span<const double> log_prob_old;
  std::span<const double> advantage;
  std::span<const double> log_prob_ref;  // may be empty when kl_coef == 0
};

struct LossTerms {
  double loss = 0.0;
  double surrogate = 0.0;  // mean clipped surrogate (to be maximized)
  double entropy = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  std::vector<double> ratios;      // per row
  std::vector<double> surrogates;  // per row min(r A, clip(r) A)
};

/// Clipped-surrogate loss over `rows` of `data`:
///   -mean min(r A, clip(r, 1-eps, 1+eps) A) - c_ent mean H + beta mean KL.
/// Writes the exact gradient into `grad` when non-null. Throws
/// NonFiniteError if the loss is not finite.
LossTerms grpo_loss(const MlpParams& params, const TimestepView& data, std::span<const std::size_t> rows,
                    const LossConfig& cfg, MlpParams* grad, bool use_reference_kernels = false);

/// Fixed-order metrics record; column names in metrics_header().
struct MetricsRow {
  std::int64_t update = 0;
  std::int64_t episodes_seen = 0;
  double goal_rate = 0.0;
  double lava_rate = 0.0;
  double battery_rate = 0.0;
  double mean_episode_len = 0.0;
  std::array<double, 1 + kNumCosts> lambda{};
  std::array<double, 1 + kNumCosts> effective_weight{};
  double sigma_rs_mean = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;
  std::array<double, kNumCosts> violation{};
  std::array<double, kNumCosts> logit{};      // NaN when not constrained
  std::array<double, kNumCosts> threshold{};  // NaN when not constrained
};

const std::vector<std::string>& metrics_header();
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  /// snapshot -> collect -> (constrained) update multipliers -> advantages
  /// -> epochs of shuffled minibatch Adam steps.
  MetricsRow update();

  std::int64_t updates_done() const { return updates_done_; }
  const TrainConfig& config() const { return cfg_; }
  const GridWorld& world() const { return world_; }
  const MlpParams& policy() const { return params_; }
  const MultiplierState& multipliers() const { return multipliers_; }
  /// (lambda_R, lambda_lava, lambda_battery) currently in force.
  std::array<double, 1 + kNumCosts> lambdas() const;
  const RolloutBatch& last_batch() const { return batch_; }
  /// Ratios seen by the first minibatch of the last update, before any step.
  const std::vector<double>& first_pass_ratios() const { return first_pass_ratios_; }

  void save_checkpoint(std::ostream& os) const;
  /// Restores a checkpoint written by save_checkpoint for the same config.
  void load_checkpoint(std::istream& is);

 private:
  TrainConfig cfg_;
  GridWorld world_;
  MlpParams params_;
  MlpParams reference_;
  AdamState adam_;
  MultiplierState multipliers_;
  std::vector<std::size_t> active_;  // constrained channels
  std::int64_t updates_done_ = 0;
  RolloutBatch batch_;
  std::vector<double> first_pass_ratios_;
};

struct TrainLoopOptions {
  std::filesystem::path out_dir;
  int checkpoint_every = 100;
  bool resume = false;
  std::function<void(const MetricsRow&)> on_row;
};

/// Runs cfg.updates updates, appending to out_dir/metrics.csv after each one
/// and checkpointing to out_dir/checkpoint.bin. With `resume`, restarts from
/// the last checkpoint and drops metrics rows written after it.
MlpParams train_loop(const TrainConfig& cfg, const TrainLoopOptions& opts);

}  // namespace cgrpo

#endif  // CGRPO_TRAINER_HPP_
