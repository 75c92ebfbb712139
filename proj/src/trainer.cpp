#include "cgrpo/trainer.hpp"

#include "cgrpo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace cgrpo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw std::invalid_argument("TrainConfig." + field + ": " + what);
}

}  // namespace

void TrainConfig::validate() const {
  grid.validate();
  require(updates >= 1, "updates", "must be >= 1");
  require(groups >= 1, "groups", "must be >= 1");
  require(group_size >= 2, "group_size", "must be >= 2");
  require(epochs >= 1, "epochs", "must be >= 1");
  require(minibatch_timesteps >= 1, "minibatch_timesteps", "must be >= 1");
  require(loss.clip_eps > 0.0 && loss.clip_eps < 1.0, "clip_eps", "must be in (0, 1)");
  require(loss.entropy_coef >= 0.0, "entropy_coef", "must be >= 0");
  require(loss.kl_coef >= 0.0, "kl_coef", "must be >= 0");
  require(policy_lr > 0.0, "policy_lr", "must be > 0");
  require(multiplier_lr > 0.0, "multiplier_lr", "must be > 0");
  require(std::isfinite(multiplier_init_logit), "multiplier_init_logit", "must be finite");
  require(eval_episodes >= 1, "eval_episodes", "must be >= 1");
  require(fixed_lambda.has_value() != thresholds.has_value(), "fixed_lambda/thresholds",
          "exactly one of them must be set");
  if (fixed_lambda) {
    for (double l : *fixed_lambda) require(std::isfinite(l) && l >= 0.0, "fixed_lambda", "must be >= 0");
  }
  if (thresholds) {
    bool any = false;
    for (const auto& t : *thresholds) {
      if (t) {
        any = true;
        require(*t >= 0.0 && *t <= 1.0, "thresholds", "must be rates in [0, 1]");
      }
    }
    require(any, "thresholds", "at least one channel must be constrained");
  }
}

std::int64_t Trajectory::events(CostChannel c) const {
  const auto& v = c == kLava ? cost_lava : cost_battery;
  return std::accumulate(v.begin(), v.end(), std::int64_t{0});
}

void group_seeds(std::uint64_t master, std::int64_t update, int group, int group_size, bool shared,
                 std::vector<std::uint64_t>& layout, std::vector<std::uint64_t>& sampling) {
  layout.resize(static_cast<std::size_t>(group_size));
  sampling.resize(static_cast<std::size_t>(group_size));
  const auto u = static_cast<std::uint64_t>(update);
  const auto g = static_cast<std::uint64_t>(group);
  for (int m = 0; m < group_size; ++m) {
    const auto mi = static_cast<std::uint64_t>(m);
    layout[static_cast<std::size_t>(m)] =
        shared ? derive_seed(master, Domain::Layout, {u, g}) : derive_seed(master, Domain::Layout, {u, g, mi});
    sampling[static_cast<std::size_t>(m)] = derive_seed(master, Domain::Sampling, {u, g, mi});
  }
}

GroupBatch collect_group(const GridWorld& world, const MlpParams& snapshot,
                         std::span<const std::uint64_t> layout_seeds,
                         std::span<const std::uint64_t> sampling_seeds) {
  if (layout_seeds.size() != sampling_seeds.size()) {
    throw std::invalid_argument("collect_group: seed list lengths differ");
  }
  const std::size_t n = layout_seeds.size();
  GroupBatch gb;
  gb.layout_seeds.assign(layout_seeds.begin(), layout_seeds.end());
  gb.sampling_seeds.assign(sampling_seeds.begin(), sampling_seeds.end());
  gb.members.resize(n);

  std::vector<EpisodeState> states;
  std::vector<Rng> rngs;
  std::vector<Observation> current(n);
  states.reserve(n);
  rngs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    states.push_back(world.reset(layout_seeds[i]));
    rngs.emplace_back(sampling_seeds[i]);
    current[i] = world.observe(states[i]);
  }

  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});
  std::vector<double> obs;
  Activations act;
  while (!active.empty()) {
    obs.resize(active.size() * kObsDim);
    for (std::size_t r = 0; r < active.size(); ++r) {
      std::copy(current[active[r]].begin(), current[active[r]].end(), obs.begin() + static_cast<std::ptrdiff_t>(r * kObsDim));
    }
    forward_batch(snapshot, obs, act);

    std::vector<std::size_t> still;
    still.reserve(active.size());
    for (std::size_t r = 0; r < active.size(); ++r) {
      const std::size_t i = active[r];
      Trajectory& tr = gb.members[i];
      const auto logits = act.row_logits(r);
      for (double v : logits) {
        if (!std::isfinite(v)) throw NonFiniteError("collect_group: non-finite logits from snapshot");
      }
      const Action a = sample_action(logits, rngs[i]);
      tr.obs.insert(tr.obs.end(), current[i].begin(), current[i].end());
      tr.actions.push_back(a);
      tr.log_probs.push_back(log_prob_and_entropy(logits, a).log_prob);

      const StepOutcome out = world.step(states[i], a);
      tr.cost_lava.push_back(static_cast<std::uint8_t>(out.cost_lava));
      tr.cost_battery.push_back(static_cast<std::uint8_t>(out.cost_battery));
      tr.positions.push_back(states[i].agent);
      tr.reward_return += out.reward;
      if (out.terminal) tr.reached_goal = true;
      current[i] = out.observation;
      if (!states[i].done) still.push_back(i);
    }
    active.swap(still);
  }
  return gb;
}

void RolloutBatch::flatten() {
  obs.clear();
  actions.clear();
  log_prob_old.clear();
  log_prob_ref.clear();
  advantage.clear();
  group_id.clear();
  traj_id.clear();
  int traj = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const Trajectory& tr : groups[g].members) {
      obs.insert(obs.end(), tr.obs.begin(), tr.obs.end());
      for (std::size_t t = 0; t < tr.length(); ++t) {
        actions.push_back(static_cast<int>(tr.actions[t]));
        log_prob_old.push_back(tr.log_probs[t]);
        advantage.push_back(0.0);
        group_id.push_back(static_cast<int>(g));
        traj_id.push_back(traj);
      }
      ++traj;
    }
  }
}

ComponentReturns component_returns(const GroupBatch& group, CostReturn how) {
  ComponentReturns cr;
  cr.components.assign(1 + kNumCosts, {});
  for (const Trajectory& tr : group.members) {
    const double len = static_cast<double>(std::max<std::size_t>(tr.length(), 1));
    cr.components[0].push_back(tr.reward_return);
    for (std::size_t c = 0; c < kNumCosts; ++c) {
      const auto e = static_cast<double>(tr.events(static_cast<CostChannel>(c)));
      cr.components[1 + c].push_back(how == CostReturn::Sum ? e : e / len);
    }
  }
  return cr;
}

AdvantageDiagnostics compute_advantages(RolloutBatch& batch, AdvantageMode mode,
                                        std::span<const double> lambdas, CostReturn how) {
  if (lambdas.size() != 1 + kNumCosts) throw std::invalid_argument("compute_advantages: need 3 lambdas");
  AdvantageDiagnostics diag;
  std::array<double, 1 + kNumCosts> sum_w{};
  double sum_sigma = 0.0;
  int sigma_groups = 0;
  std::vector<double> traj_adv;
  for (const GroupBatch& g : batch.groups) {
    const ComponentReturns cr = component_returns(g, how);
    ScalarizedRewardResult screw = scalarized_reward_advantage(cr, lambdas);
    std::vector<double> adv;
    EffectiveWeights eff;
    if (mode == AdvantageMode::ScalarizedRewards) {
      adv = std::move(screw.advantages);
      eff = screw.effective;
    } else {
      adv = scalarized_advantage(cr, lambdas);
      eff = scalarized_advantage_weights(lambdas);
      eff.sigma_rs = screw.effective.sigma_rs;
    }
    if (eff.defined) {
      ++diag.defined_groups;
      for (std::size_t j = 0; j < sum_w.size(); ++j) sum_w[j] += eff.weights[j];
    }
    if (screw.effective.defined) {
      sum_sigma += screw.effective.sigma_rs;
      ++sigma_groups;
    }
    diag.per_group.push_back(std::move(eff));
    traj_adv.insert(traj_adv.end(), adv.begin(), adv.end());
  }
  for (std::size_t j = 0; j < sum_w.size(); ++j) {
    diag.effective_weights[j] = diag.defined_groups > 0 ? sum_w[j] / diag.defined_groups : kNaN;
  }
  diag.sigma_rs_mean = sigma_groups > 0 ? sum_sigma / sigma_groups : kNaN;

  batch.advantage.resize(batch.timesteps());
  for (std::size_t t = 0; t < batch.timesteps(); ++t) {
    batch.advantage[t] = traj_adv[static_cast<std::size_t>(batch.traj_id[t])];
  }
  return diag;
}

LossTerms grpo_loss(const MlpParams& params, const TimestepView& data, std::span<const std::size_t> rows,
                    const LossConfig& cfg, MlpParams* grad, bool use_reference_kernels) {
  const std::size_t n = rows.size();
  if (n == 0) throw std::invalid_argument("grpo_loss: empty minibatch");
  const bool use_kl = cfg.kl_coef > 0.0;
  if (use_kl && data.log_prob_ref.size() != data.actions.size()) {
    throw std::invalid_argument("grpo_loss: kl_coef > 0 needs reference log-probs");
  }

  std::vector<double> obs(n * kObsDim);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(data.obs.begin() + static_cast<std::ptrdiff_t>(rows[i] * kObsDim), kObsDim,
                obs.begin() + static_cast<std::ptrdiff_t>(i * kObsDim));
  }
  Activations act;
  if (use_reference_kernels) {
    reference::forward_batch(params, obs, act);
  } else {
    forward_batch(params, obs, act);
  }

  LossTerms out;
  out.ratios.resize(n);
  out.surrogates.resize(n);
  std::vector<double> dlogits(n * kNumActions, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lo = 1.0 - cfg.clip_eps;
  const double hi = 1.0 + cfg.clip_eps;
  int clipped = 0;
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = rows[i];
    const auto logits = act.row_logits(i);
    const auto a = static_cast<Action>(data.actions[row]);
    const LogProbEntropy le = log_prob_and_entropy(logits, a);
    const Logits p = softmax(logits);
    const double adv = data.advantage[row];
    const double ratio = std::exp(le.log_prob - data.log_prob_old[row]);
    const double unclipped = ratio * adv;
    const double clipped_term = std::clamp(ratio, lo, hi) * adv;
    const bool take_unclipped = unclipped <= clipped_term;
    const double surrogate = take_unclipped ? unclipped : clipped_term;
    if (!take_unclipped) ++clipped;
    out.ratios[i] = ratio;
    out.surrogates[i] = surrogate;

    // d(row loss)/d(log pi(a|s))
    double dlp = take_unclipped ? -ratio * adv : 0.0;
    double kl = 0.0;
    if (use_kl) {
      const double diff = data.log_prob_ref[row] - le.log_prob;
      kl = std::exp(diff) - diff - 1.0;
      dlp += cfg.kl_coef * (1.0 - std::exp(diff));
    }
    loss_sum += -surrogate - cfg.entropy_coef * le.entropy + cfg.kl_coef * kl;
    out.surrogate += surrogate;
    out.entropy += le.entropy;
    out.kl += kl;

    double* dz = dlogits.data() + i * kNumActions;
    for (int j = 0; j < kNumActions; ++j) {
      const double onehot = j == static_cast<int>(a) ? 1.0 : 0.0;
      const double dentropy = p[j] > 0.0 ? -p[j] * (std::log(p[j]) + le.entropy) : 0.0;
      dz[j] = inv_n * (dlp * (onehot - p[j]) - cfg.entropy_coef * dentropy);
    }
  }
  out.loss = loss_sum * inv_n;
  out.surrogate *= inv_n;
  out.entropy *= inv_n;
  out.kl *= inv_n;
  out.clip_fraction = clipped * inv_n;
  if (!std::isfinite(out.loss)) {
    std::ostringstream msg;
    msg << "grpo_loss: non-finite loss (surrogate " << out.surrogate << ", entropy " << out.entropy << ")";
    throw NonFiniteError(msg.str());
  }

  if (grad != nullptr) {
    if (use_reference_kernels) {
      reference::backward_batch(params, obs, act, dlogits, *grad);
    } else {
      backward_batch(params, obs, act, dlogits, *grad);
    }
    if (const auto bad = first_nonfinite_block(*grad)) {
      throw NonFiniteError("grpo_loss: non-finite gradient in block " + std::string(*bad));
    }
  }
  return out;
}

const std::vector<std::string>& metrics_header() {
  static const std::vector<std::string> h = {
      "update",        "episodes_seen", "goal_rate",      "lava_rate_per_step", "battery_rate_per_step",
      "mean_episode_len", "lambda_R",   "lambda_lava",    "lambda_battery",     "eff_w_R",
      "eff_w_lava",    "eff_w_battery", "sigma_RS_mean",  "policy_loss",        "entropy",
      "J_lava",        "J_battery",     "z_lava",         "z_battery",          "d_lava",
      "d_battery"};
  return h;
}

void write_metrics_header(std::ostream& os) {
  const auto& h = metrics_header();
  for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
  os << '\n';
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
  os << r.update << ',' << r.episodes_seen << ',' << num(r.goal_rate) << ',' << num(r.lava_rate) << ','
     << num(r.battery_rate) << ',' << num(r.mean_episode_len);
  for (double v : r.lambda) os << ',' << num(v);
  for (double v : r.effective_weight) os << ',' << num(v);
  os << ',' << num(r.sigma_rs_mean) << ',' << num(r.policy_loss) << ',' << num(r.entropy);
  for (double v : r.violation) os << ',' << num(v);
  for (double v : r.logit) os << ',' << num(v);
  for (double v : r.threshold) os << ',' << num(v);
  os << '\n';
}

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)), world_((cfg_.validate(), cfg_.grid)) {
  params_ = MlpParams::init(derive_seed(cfg_.seed, Domain::Init));
  reference_ = params_;
  adam_ = AdamState(MlpParams::kSize, cfg_.policy_lr);
  if (cfg_.thresholds) {
    std::vector<double> d;
    for (std::size_t c = 0; c < kNumCosts; ++c) {
      if ((*cfg_.thresholds)[c]) {
        active_.push_back(c);
        d.push_back(*(*cfg_.thresholds)[c]);
      }
    }
    multipliers_ = MultiplierState(std::move(d), cfg_.multiplier_init_logit, cfg_.multiplier_lr);
  }
}

std::array<double, 1 + kNumCosts> Trainer::lambdas() const {
  std::array<double, 1 + kNumCosts> out{};
  if (cfg_.fixed_lambda) {
    out[0] = 1.0;
    for (std::size_t c = 0; c < kNumCosts; ++c) out[1 + c] = (*cfg_.fixed_lambda)[c];
    return out;
  }
  const std::vector<double> lam = multipliers_.lambdas();
  out[0] = lam[0];
  for (std::size_t i = 0; i < active_.size(); ++i) out[1 + active_[i]] = lam[1 + i];
  return out;
}

MetricsRow Trainer::update() {
  const std::int64_t u = updates_done_;
  const MlpParams snapshot = params_;

  batch_.groups.assign(static_cast<std::size_t>(cfg_.groups), {});
  const int ngroups = cfg_.groups;
#pragma omp parallel for schedule(static)
  for (int g = 0; g < ngroups; ++g) {
    std::vector<std::uint64_t> layout, sampling;
    group_seeds(cfg_.seed, u, g, cfg_.group_size, cfg_.shared_layouts, layout, sampling);
    batch_.groups[static_cast<std::size_t>(g)] = collect_group(world_, snapshot, layout, sampling);
  }
  batch_.flatten();
  const std::size_t n = batch_.timesteps();
  if (cfg_.loss.kl_coef > 0.0) {
    Activations ref_act;
    forward_batch(reference_, batch_.obs, ref_act);
    batch_.log_prob_ref.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      batch_.log_prob_ref[t] =
          log_prob_and_entropy(ref_act.row_logits(t), static_cast<Action>(batch_.actions[t])).log_prob;
    }
  }

  // Behavior rates over every timestep of the batch.
  std::vector<CostTally> tallies;
  int goals = 0;
  for (const GroupBatch& g : batch_.groups) {
    for (const Trajectory& tr : g.members) {
      tallies.push_back({static_cast<std::int64_t>(tr.length()), {tr.events(kLava), tr.events(kBattery)}});
      goals += tr.reached_goal ? 1 : 0;
    }
  }
  const ViolationEstimate rates = estimate_violations(tallies);

  if (cfg_.constrained()) {
    ViolationEstimate active_rates;
    active_rates.timesteps = rates.timesteps;
    for (std::size_t c : active_) active_rates.rates.push_back(rates.rates[c]);
    update_multipliers(multipliers_, active_rates);
  }
  const auto lam = lambdas();
  const AdvantageDiagnostics diag = compute_advantages(batch_, cfg_.mode, lam, cfg_.cost_return);

  const TimestepView view{batch_.obs, batch_.actions, batch_.log_prob_old, batch_.advantage, batch_.log_prob_ref};
  const std::size_t mb = static_cast<std::size_t>(cfg_.minibatch_timesteps);
  const std::size_t num_mb = n <= mb ? 1 : n / mb;
  const std::size_t mb_size = n <= mb ? n : mb;
  std::vector<std::size_t> order(n);
  MlpParams grad;
  double loss_sum = 0.0;
  double entropy_sum = 0.0;
  int steps = 0;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(derive_seed(cfg_.seed, Domain::Shuffle, {static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.index(i))]);
    }
    for (std::size_t b = 0; b < num_mb; ++b) {
      const std::span<const std::size_t> rows(order.data() + b * mb_size, mb_size);
      LossTerms terms = grpo_loss(params_, view, rows, cfg_.loss, &grad);
      if (epoch == 0 && b == 0) first_pass_ratios_ = std::move(terms.ratios);
      adam_step(params_.values(), grad.values(), adam_);
      loss_sum += terms.loss;
      entropy_sum += terms.entropy;
      ++steps;
    }
  }
  if (const auto bad = first_nonfinite_block(params_)) {
    throw NonFiniteError("update: parameters became non-finite in block " + std::string(*bad));
  }
  ++updates_done_;

  MetricsRow row;
  row.update = updates_done_;
  row.episodes_seen = updates_done_ * cfg_.episodes_per_update();
  row.goal_rate = static_cast<double>(goals) / static_cast<double>(tallies.size());
  row.lava_rate = rates.rates[kLava];
  row.battery_rate = rates.rates[kBattery];
  row.mean_episode_len = static_cast<double>(n) / static_cast<double>(tallies.size());
  row.lambda = lam;
  row.effective_weight = diag.effective_weights;
  row.sigma_rs_mean = diag.sigma_rs_mean;
  row.policy_loss = loss_sum / steps;
  row.entropy = entropy_sum / steps;
  row.violation = {rates.rates[kLava], rates.rates[kBattery]};
  row.logit = {kNaN, kNaN};
  row.threshold = {kNaN, kNaN};
  for (std::size_t i = 0; i < active_.size(); ++i) {
    row.logit[active_[i]] = multipliers_.logits[i];
    row.threshold[active_[i]] = multipliers_.thresholds[i];
  }
  return row;
}

namespace {

constexpr char kCkptMagic[8] = {'C', 'G', 'R', 'P', 'O', 'C', 'K', 'P'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CheckpointError("checkpoint truncated");
  return v;
}

void put_vec(std::ostream& os, const std::vector<double>& v) {
  put(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_vec(std::istream& is, std::size_t expected) {
  const auto n = get<std::uint64_t>(is);
  if (n != expected) throw CheckpointError("checkpoint vector length mismatch");
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw CheckpointError("checkpoint truncated");
  return v;
}

void put_adam(std::ostream& os, const AdamState& a) {
  put(os, a.t);
  put(os, a.lr);
  put(os, a.beta1);
  put(os, a.beta2);
  put(os, a.eps);
  put_vec(os, a.first_moment);
  put_vec(os, a.second_moment);
}

AdamState get_adam(std::istream& is, std::size_t size) {
  AdamState a;
  a.t = get<std::int64_t>(is);
  a.lr = get<double>(is);
  a.beta1 = get<double>(is);
  a.beta2 = get<double>(is);
  a.eps = get<double>(is);
  a.first_moment = get_vec(is, size);
  a.second_moment = get_vec(is, size);
  return a;
}

}  // namespace

void Trainer::save_checkpoint(std::ostream& os) const {
  os.write(kCkptMagic, sizeof(kCkptMagic));
  put(os, kCkptVersion);
  put(os, updates_done_);
  save_params(os, params_);
  save_params(os, reference_);
  put_adam(os, adam_);
  put(os, static_cast<std::uint64_t>(multipliers_.num_constraints()));
  put(os, multipliers_.reward_logit);
  put_vec(os, multipliers_.logits);
  put_vec(os, multipliers_.thresholds);
  put_adam(os, multipliers_.adam);
  if (!os) throw CheckpointError("failed writing checkpoint");
}

void Trainer::load_checkpoint(std::istream& is) {
  char magic[sizeof(kCkptMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0) throw CheckpointError("not a trainer checkpoint");
  if (get<std::uint32_t>(is) != kCkptVersion) throw CheckpointError("unsupported checkpoint version");
  const auto done = get<std::int64_t>(is);
  MlpParams params = load_params(is);
  MlpParams reference = load_params(is);
  AdamState adam = get_adam(is, MlpParams::kSize);
  const auto k = get<std::uint64_t>(is);
  if (k != multipliers_.num_constraints()) throw CheckpointError("checkpoint constraint count differs from config");
  MultiplierState ms = multipliers_;
  ms.reward_logit = get<double>(is);
  ms.logits = get_vec(is, k);
  ms.thresholds = get_vec(is, k);
  ms.adam = get_adam(is, k);
  if (ms.thresholds != multipliers_.thresholds) throw CheckpointError("checkpoint thresholds differ from config");
  updates_done_ = done;
  params_ = std::move(params);
  reference_ = std::move(reference);
  adam_ = std::move(adam);
  multipliers_ = std::move(ms);
}

MlpParams train_loop(const TrainConfig& cfg, const TrainLoopOptions& opts) {
  namespace fs = std::filesystem;
  Trainer trainer(cfg);
  fs::create_directories(opts.out_dir);
  const fs::path metrics = opts.out_dir / "metrics.csv";
  const fs::path ckpt = opts.out_dir / "checkpoint.bin";

  if (opts.resume && fs::exists(ckpt)) {
    std::ifstream in(ckpt, std::ios::binary);
    trainer.load_checkpoint(in);
    // Keep only rows up to the checkpointed update.
    std::vector<std::string> kept;
    std::ifstream old(metrics);
    std::string line;
    if (std::getline(old, line)) kept.push_back(line);
    while (std::getline(old, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      if (std::stoll(line.substr(0, comma)) <= trainer.updates_done()) kept.push_back(line);
    }
    old.close();
    std::ofstream rewrite(metrics, std::ios::trunc);
    if (kept.empty()) {
      write_metrics_header(rewrite);
    }
    for (const auto& l : kept) rewrite << l << '\n';
    if (!rewrite) throw std::runtime_error("cannot rewrite " + metrics.string());
  } else {
    std::ofstream fresh(metrics, std::ios::trunc);
    write_metrics_header(fresh);
    if (!fresh) throw std::runtime_error("cannot write " + metrics.string());
  }

  const auto write_ckpt = [&] {
    const fs::path tmp = ckpt.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      trainer.save_checkpoint(out);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, ckpt);
  };

  std::ofstream out(metrics, std::ios::app);
  while (trainer.updates_done() < cfg.updates) {
    const MetricsRow row = trainer.update();
    write_metrics_row(out, row);
    out.flush();
    if (!out) throw std::runtime_error("cannot append to " + metrics.string());
    if (opts.on_row) opts.on_row(row);
    if (opts.checkpoint_every > 0 && trainer.updates_done() % opts.checkpoint_every == 0) write_ckpt();
  }
  write_ckpt();
  return trainer.policy();
}

}  // namespace cgrpo
