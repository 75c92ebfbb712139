// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only N] [--runs-dir DIR] [--spec-dir DIR] [--workers W] [--full-budget]
//
// Criteria 7 and 8 train 24 reduced-budget runs (one to two minutes each on
// one core) under --runs-dir and reuse finished runs on the next invocation.
// Criterion 9 trains 30 runs of 8000 updates and only runs with --full-budget.

#include "cgrpo/csv.hpp"
#include "cgrpo/experiment.hpp"
#include "cgrpo/plot.hpp"
#include "cgrpo/rng.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

using namespace cgrpo;
namespace fs = std::filesystem;

namespace {

constexpr int kSkip = 77;

struct Verdict {
  bool pass = false;
  std::string detail;
  bool skipped = false;
};

struct Env {
  fs::path runs_dir;
  fs::path spec_dir;
  int workers = 1;
  bool full_budget = false;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population variance.
double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

std::vector<double> finite(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) {
    if (std::isfinite(x)) out.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------------------

Verdict worked_example() {
  Stopwatch sw;
  const double lam[2] = {0.3, 0.7}, sig[2] = {0.5, 0.2}, rho = 0.1;
  const std::vector<double> cov = {sig[0] * sig[0], rho * sig[0] * sig[1], rho * sig[0] * sig[1], sig[1] * sig[1]};
  const EffectiveWeights e = effective_weights(sig, lam, cov);
  const TheoremReport rep = verify_theorem(1, 0);
  // Hand expansion: Var(l1 X1 + l2 X2) with correlation rho.
  const double oracle_sigma = std::sqrt(lam[0] * lam[0] * sig[0] * sig[0] + lam[1] * lam[1] * sig[1] * sig[1] +
                                        2.0 * lam[0] * lam[1] * rho * sig[0] * sig[1]);
  const double secs = sw.seconds();
  const bool ok = e.defined && std::abs(e.sigma_rs - 0.215174) < 1e-6 && std::abs(e.sigma_rs - oracle_sigma) < 1e-12 &&
                  std::abs(e.weights[0] - 0.697) < 1e-3 && std::abs(e.weights[1] - 0.651) < 1e-3 &&
                  std::abs(e.weights[0] - lam[0] * sig[0] / oracle_sigma) < 1e-12 && rep.example_ok && secs < 1.0;
  return {ok, fmt("sigma_RS=%.6f weights=(%.4f, %.4f) in %.3fs", e.sigma_rs, e.weights[0], e.weights[1], secs)};
}

Verdict identity_suite() {
  Stopwatch sw;
  const TheoremReport rep = verify_theorem(10000, 2024);
  const double secs = sw.seconds();
  const bool ok = rep.groups >= 10000 && rep.max_identity_residual < 1e-9 && rep.degenerate_groups > 0 && secs < 30.0;
  return {ok, fmt("%d groups (%d degenerate, guarded to zero), max residual %.2e in %.1fs", rep.groups,
                  rep.degenerate_groups, rep.max_identity_residual, secs)};
}

Verdict scale_contrast() {
  const TheoremReport rep = verify_theorem(10000, 77);
  const bool ok = rep.scale_checks >= 2000 && rep.max_scadv_change < 1e-12 && rep.scale_checked_screw > 0 &&
                  rep.min_screw_change > 1e-6 && rep.scale_failures == 0;
  return {ok, fmt("%d rescalings: scadv max change %.2e, screw min change %.2e over %d active checks", rep.scale_checks,
                  rep.max_scadv_change, rep.min_screw_change, rep.scale_checked_screw)};
}

Verdict gradient_check() {
  Stopwatch sw;
  const GridWorld world;
  Rng rng(derive_seed(4, Domain::Test));
  LossConfig cfg;
  cfg.entropy_coef = 0.01;
  const double delta = 1e-5;
  double worst = 0.0;
  for (int mb = 0; mb < 20; ++mb) {
    const MlpParams p = MlpParams::init(derive_seed(4, Domain::Init, {static_cast<std::uint64_t>(mb)}));
    RolloutBatch batch;
    for (int g = 0; g < 2; ++g) {
      std::vector<std::uint64_t> layout, sampling;
      group_seeds(100 + mb, 0, g, 4, true, layout, sampling);
      batch.groups.push_back(collect_group(world, p, layout, sampling));
    }
    batch.flatten();
    for (std::size_t t = 0; t < batch.timesteps(); ++t) {
      batch.advantage[t] = rng.normal();
      batch.log_prob_old[t] += rng.uniform(-0.4, 0.4);  // some rows clipped
    }
    std::vector<std::size_t> rows(std::min<std::size_t>(128, batch.timesteps()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = rng.index(batch.timesteps());
    const TimestepView view{batch.obs, batch.actions, batch.log_prob_old, batch.advantage, {}};
    MlpParams grad;
    grpo_loss(p, view, rows, cfg, &grad);

    // Central differences on 64 random coordinates (a quarter drawn from the
    // output layer, where every coordinate is live).
    double num = 0.0, den = 0.0;
    for (int c = 0; c < 64; ++c) {
      const std::size_t idx = c % 4 == 0 ? MlpParams::kW3 + rng.index(MlpParams::kSize - MlpParams::kW3)
                                         : rng.index(MlpParams::kSize);
      MlpParams plus = p, minus = p;
      plus.data()[idx] += delta;
      minus.data()[idx] -= delta;
      const double fd = (grpo_loss(plus, view, rows, cfg, nullptr).loss - grpo_loss(minus, view, rows, cfg, nullptr).loss) /
                        (2.0 * delta);
      num += (fd - grad.data()[idx]) * (fd - grad.data()[idx]);
      den += grad.data()[idx] * grad.data()[idx];
    }
    worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
  }
  const double secs = sw.seconds();
  return {worst < 1e-4 && secs < 60.0,
          fmt("20 minibatches x 64 coordinates, worst relative error %.2e in %.1fs", worst, secs)};
}

Verdict lagrangian_signs() {
  Rng rng(derive_seed(5, Domain::Test));
  int violated_ok = 0, satisfied_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 1 + rng.index(3);
    std::vector<double> d(k), z(k);
    for (std::size_t j = 0; j < k; ++j) {
      d[j] = rng.uniform(0.005, 0.5);
      z[j] = rng.uniform(-3.0, 3.0);
    }
    // One violated channel, the others satisfied.
    const std::size_t bad = rng.index(k);
    std::vector<double> j1(k);
    for (std::size_t j = 0; j < k; ++j) j1[j] = j == bad ? rng.uniform(d[j] * 1.01, 1.0) : rng.uniform(0.0, d[j]);
    MultiplierState a(d, 0.0, rng.uniform(1e-3, 5e-2));
    a.logits = z;
    const double before = a.lambdas()[1 + bad];
    update_multipliers(a, ViolationEstimate{j1, 1000});
    if (a.lambdas()[1 + bad] > before) ++violated_ok;

    // Everything satisfied.
    std::vector<double> j2(k);
    for (std::size_t j = 0; j < k; ++j) j2[j] = rng.uniform(0.0, d[j]);
    MultiplierState b(d, 0.0, rng.uniform(1e-3, 5e-2));
    b.logits = z;
    const auto lb = b.lambdas();
    update_multipliers(b, ViolationEstimate{j2, 1000});
    const auto la = b.lambdas();
    bool all = true;
    for (std::size_t j = 1; j <= k; ++j) all = all && la[j] <= lb[j];
    if (all) ++satisfied_ok;
  }
  return {violated_ok == 1000 && satisfied_ok == 1000,
          fmt("violated lambda rose in %d/1000 cases, all-satisfied lambdas fell in %d/1000", violated_ok, satisfied_ok)};
}

Verdict simplex_and_standardization() {
  TrainConfig cfg;
  cfg.updates = 500;
  cfg.seed = 6;
  cfg.thresholds = std::array<std::optional<double>, kNumCosts>{0.01, 0.01};
  Trainer t(cfg);
  double worst_sum = 0.0, worst_mean = 0.0, worst_std = 0.0;
  long groups = 0;
  for (int u = 0; u < cfg.updates; ++u) {
    const MetricsRow row = t.update();
    const auto lam = t.lambdas();
    worst_sum = std::max({worst_sum, std::abs(lam[0] + lam[1] + lam[2] - 1.0),
                          std::abs(row.lambda[0] + row.lambda[1] + row.lambda[2] - 1.0)});
    for (const GroupBatch& g : t.last_batch().groups) {
      const ComponentReturns cr = component_returns(g, cfg.cost_return);
      for (const auto& comp : cr.components) {
        const Standardized s = standardize_full(comp);
        if (s.sigma < kStdEps) continue;
        ++groups;
        worst_mean = std::max(worst_mean, std::abs(mean(s.z)));
        worst_std = std::max(worst_std, std::abs(std::sqrt(variance(s.z)) - 1.0));
      }
    }
  }
  const bool ok = worst_sum < 1e-12 && worst_mean < 1e-12 && worst_std < 1e-9 && groups > 0;
  return {ok, fmt("500 updates: max |sum lambda - 1| %.1e; %ld non-degenerate components, max |mean z| %.1e, "
                  "max |std z - 1| %.1e",
                  worst_sum, groups, worst_mean, worst_std)};
}

// Trains (or resumes) every run of a spec under runs_dir/name.
fs::path ensure_runs(const Env& env, const std::string& name, const ExperimentSpec& spec) {
  RunOptions opts;
  opts.out_dir = env.runs_dir / name;
  opts.workers = env.workers;
  opts.resume = true;
  opts.quiet = true;
  run_experiment(spec, opts);
  return opts.out_dir;
}

EvalReport eval_of(const fs::path& dir, const std::string& cell) { return read_eval_csv(dir / cell / "eval.csv"); }

Verdict learning_trend(const Env& env) {
  const ExperimentSpec spec = load_spec(env.spec_dir / "learning.spec");
  const fs::path dir = ensure_runs(env, "learning", spec);
  const auto cell = [](const char* mode, const char* ll, std::uint64_t s) {
    return std::string(mode) + "_ll" + ll + "_lb0_s" + std::to_string(s);
  };
  std::map<std::string, std::vector<double>> goal, lava;
  for (const char* mode : {"screw", "scadv"}) {
    for (const char* ll : {"0", "0.01", "0.1"}) {
      for (std::uint64_t s : spec.seeds) {
        const EvalReport e = eval_of(dir, cell(mode, ll, s));
        goal[std::string(mode) + ll].push_back(e.goal_rate);
        lava[std::string(mode) + ll].push_back(e.lava_rate);
      }
    }
  }
  const bool reach = mean(goal["screw0"]) >= 0.8 && mean(goal["scadv0"]) >= 0.8;
  int lower = 0;
  for (std::size_t i = 0; i < spec.seeds.size(); ++i) lower += lava["screw0.01"][i] < lava["scadv0.01"][i] ? 1 : 0;
  const bool order = mean(goal["scadv0.01"]) >= mean(goal["screw0.01"]) && mean(goal["scadv0.1"]) >= mean(goal["screw0.1"]);
  std::string detail = fmt(
      "goal@0 screw %.3f scadv %.3f; lava/step@0.01 screw<scadv in %d/3 seeds (%.4f vs %.4f); "
      "goal@0.01 scadv %.3f screw %.3f; goal@0.1 scadv %.3f screw %.3f",
      mean(goal["screw0"]), mean(goal["scadv0"]), lower, mean(lava["screw0.01"]), mean(lava["scadv0.01"]),
      mean(goal["scadv0.01"]), mean(goal["screw0.01"]), mean(goal["scadv0.1"]), mean(goal["screw0.1"]));
  return {reach && lower >= 2 && order, detail};
}

struct ConstrainedStats {
  std::vector<double> var_eff, var_lambda, final_lava;
};

ConstrainedStats constrained_stats(const fs::path& dir, const std::string& mode, const std::string& point,
                                   const std::vector<std::uint64_t>& seeds) {
  ConstrainedStats st;
  for (std::uint64_t s : seeds) {
    const CsvTable m = read_csv(dir / (mode + "_" + point + "_s" + std::to_string(s)) / "metrics.csv");
    m.require({"eff_w_lava", "lambda_lava", "lava_rate_per_step"});
    st.var_eff.push_back(variance(finite(m.numbers("eff_w_lava"))));
    st.var_lambda.push_back(variance(m.numbers("lambda_lava")));
    const std::vector<double> lava = m.numbers("lava_rate_per_step");
    const std::size_t tail = std::max<std::size_t>(1, lava.size() / 10);
    st.final_lava.push_back(mean(std::vector<double>(lava.end() - static_cast<std::ptrdiff_t>(tail), lava.end())));
  }
  return st;
}

Verdict constrained_trend(const Env& env) {
  const ExperimentSpec spec = load_spec(env.spec_dir / "constrained.spec");
  const fs::path dir = ensure_runs(env, "constrained", spec);
  const ConstrainedStats rew = constrained_stats(dir, "screw", "dl0.01_db0.01", spec.seeds);
  const ConstrainedStats adv = constrained_stats(dir, "scadv", "dl0.01_db0.01", spec.seeds);
  bool noisier = true;
  for (std::size_t i = 0; i < rew.var_eff.size(); ++i) noisier = noisier && rew.var_eff[i] > rew.var_lambda[i];
  const double gap_rew = std::abs(mean(rew.final_lava) - 0.01);
  const double gap_adv = std::abs(mean(adv.final_lava) - 0.01);
  return {noisier && gap_adv < gap_rew,
          fmt("screw Var(e_lava)/Var(lambda_lava) per seed %.3g/%.3g, %.3g/%.3g, %.3g/%.3g; "
              "final lava/step scadv %.4f (|gap| %.4f) vs screw %.4f (|gap| %.4f)",
              rew.var_eff[0], rew.var_lambda[0], rew.var_eff[1], rew.var_lambda[1], rew.var_eff[2], rew.var_lambda[2],
              mean(adv.final_lava), gap_adv, mean(rew.final_lava), gap_rew)};
}

Verdict full_budget(const Env& env) {
  if (!env.full_budget) {
    return {true, "skipped: pass --full-budget (30 runs x 8000 updates, roughly 2-3 h on one core)", true};
  }
  ExperimentSpec spec = parse_spec("version = 1\npreset = paper-thresholds\nmodes = screw,scadv\n");
  const fs::path dir = ensure_runs(env, "full", spec);
  const std::vector<fs::path> plots = plot_run(dir);
  int curve_plots = 0;
  for (const fs::path& p : plots) curve_plots += p.filename().string().rfind("curves_", 0) == 0 ? 1 : 0;
  const ConstrainedStats rew = constrained_stats(dir, "screw", "dl0.01_db0.01", spec.seeds);
  const ConstrainedStats adv = constrained_stats(dir, "scadv", "dl0.01_db0.01", spec.seeds);
  bool noisier = true;
  for (std::size_t i = 0; i < rew.var_eff.size(); ++i) noisier = noisier && rew.var_eff[i] > rew.var_lambda[i];
  const double gap_rew = std::abs(mean(rew.final_lava) - 0.01);
  const double gap_adv = std::abs(mean(adv.final_lava) - 0.01);
  return {curve_plots == 6 && noisier && gap_adv < gap_rew,
          fmt("%d curve panels written to %s; (0.01, 0.01): final lava/step scadv %.4f vs screw %.4f",
              curve_plots, (dir / "plots").c_str(), mean(adv.final_lava), mean(rew.final_lava))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained GRPO acceptance suite"};
  Env env;
  std::vector<int> only;
  env.runs_dir = "acceptance_runs";
  env.spec_dir = ACCEPTANCE_SPEC_DIR;
  env.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--runs-dir", env.runs_dir, "where training runs for criteria 7-9 live");
  app.add_option("--spec-dir", env.spec_dir, "directory with learning.spec and constrained.spec");
  app.add_option("--workers", env.workers, "concurrent training runs")->check(CLI::PositiveNumber);
  app.add_flag("--full-budget", env.full_budget, "run criterion 9 (8000 updates x 5 seeds)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"worked example", worked_example},
      {"identity suite", identity_suite},
      {"scale contrast", scale_contrast},
      {"loss gradient", gradient_check},
      {"multiplier signs", lagrangian_signs},
      {"simplex and z-score invariants", simplex_and_standardization},
      {"fixed-weight learning trend", [&] { return learning_trend(env); }},
      {"constrained-run dynamics", [&] { return constrained_trend(env); }},
      {"full budget", [&] { return full_budget(env); }},
  };

  int failed = 0, skipped = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    ++ran;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const char* tag = v.skipped ? "SKIP" : v.pass ? "PASS" : "FAIL";
    std::printf("criterion %d [%s] %s: %s\n", id, tag, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
    if (v.skipped) {
      ++skipped;
    } else if (!v.pass) {
      ++failed;
    }
  }
  if (failed > 0) return 1;
  return ran > 0 && skipped == ran ? kSkip : 0;
}
