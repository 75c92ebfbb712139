// Command-line front end: train, sweep, eval, verify-theorem, plot.

#include "cgrpo/csv.hpp"
#include "cgrpo/experiment.hpp"
#include "cgrpo/plot.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace cgrpo;

namespace {

enum Exit : int { kOk = 0, kValidation = 1, kRuntime = 2, kTheorem = 3 };

ExperimentSpec spec_from(const std::string& path, std::optional<std::uint64_t> seed) {
  ExperimentSpec spec = path.empty() ? ExperimentSpec{} : load_spec(path);
  if (seed) spec.seeds = {*seed};
  spec.validate();
  return spec;
}

void print_eval(const EvalReport& r) {
  std::printf("episodes=%d seed=%llu goal_rate=%.4f lava_rate_per_step=%.5f battery_rate_per_step=%.5f "
              "mean_episode_len=%.2f\n",
              r.episodes, static_cast<unsigned long long>(r.seed), r.goal_rate, r.lava_rate, r.battery_rate,
              r.mean_episode_len);
}

int cmd_train(const std::string& spec_path, const fs::path& out, std::optional<std::uint64_t> seed, bool resume) {
  const ExperimentSpec spec = spec_from(spec_path, seed);
  const std::vector<RunCell> cells = enumerate_cells(spec);
  if (cells.size() != 1) {
    throw SpecError("train: spec describes " + std::to_string(cells.size()) +
                    " runs; use one mode, one config point and one seed (or --seed), or the sweep verb");
  }
  const RunCell& cell = cells.front();
  fs::create_directories(out);
  {
    std::ofstream cfg(out / "config.txt");
    cfg << serialize_spec(spec);
  }
  TrainLoopOptions lo;
  lo.out_dir = out;
  lo.checkpoint_every = spec.checkpoint_every;
  lo.resume = resume;
  lo.on_row = [&](const MetricsRow& r) {
    if (r.update % 100 == 0 || r.update == cell.config.updates) {
      std::fprintf(stderr, "update %lld/%d goal=%.3f lava=%.4f battery=%.4f lambda=(%.3f, %.3f, %.3f)\n",
                   static_cast<long long>(r.update), cell.config.updates, r.goal_rate, r.lava_rate, r.battery_rate,
                   r.lambda[0], r.lambda[1], r.lambda[2]);
    }
  };
  const MlpParams policy = train_loop(cell.config, lo);
  const EvalReport rep = evaluate_policy(policy, cell.config.grid, cell.config.eval_episodes, cell.config.seed);
  write_eval_csv(out / "eval.csv", rep, &cell);
  print_eval(rep);
  return kOk;
}

int cmd_sweep(const std::string& spec_path, const fs::path& out, std::optional<std::uint64_t> seed, int workers,
              bool resume) {
  const ExperimentSpec spec = spec_from(spec_path, seed);
  RunOptions opts;
  opts.out_dir = out;
  opts.workers = workers;
  opts.resume = resume;
  const std::string manifest = manifest_text(spec);
  std::printf("%zu runs, manifest %s\n", enumerate_cells(spec).size(), git_blob_hash(manifest).c_str());
  run_experiment(spec, opts);
  std::printf("wrote %s\n", (out / "summary.csv").string().c_str());
  return kOk;
}

int cmd_eval(const fs::path& checkpoint, const std::string& spec_path, std::optional<std::uint64_t> seed,
             std::optional<int> episodes, const std::string& out) {
  GridConfig grid;
  int n = 1000;
  if (!spec_path.empty()) {
    const ExperimentSpec spec = load_spec(spec_path);
    grid = spec.train.grid;
    n = spec.train.eval_episodes;
  }
  if (episodes) n = *episodes;
  if (n < 1) throw SpecError("episodes: must be >= 1");
  const MlpParams policy = load_policy(checkpoint);
  const EvalReport rep = evaluate_policy(policy, grid, n, seed.value_or(0));
  print_eval(rep);
  if (!out.empty()) {
    fs::create_directories(out);
    write_eval_csv(fs::path(out) / "eval.csv", rep);
  }
  return kOk;
}

int cmd_verify(int samples, std::uint64_t seed) {
  const TheoremReport rep = verify_theorem(samples, seed);
  std::cout << rep.text();
  return rep.ok ? kOk : kTheorem;
}

int cmd_plot(const fs::path& dir) {
  for (const fs::path& p : plot_run(dir)) std::printf("wrote %s\n", p.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained GRPO gridworld experiments"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out;
  std::uint64_t seed_value = 0;
  int workers = 1;
  bool resume = false;

  auto add_common = [&](CLI::App* sub, bool need_out) {
    sub->add_option("--spec", spec_path, "experiment spec file (key = value)")->check(CLI::ExistingFile);
    auto* o = sub->add_option("--out", out, "output directory");
    if (need_out) o->required();
    return sub->add_option("--seed", seed_value, "master seed (overrides the spec's seed list)");
  };

  auto* train = app.add_subcommand("train", "train one run and evaluate it");
  auto* train_seed = add_common(train, true);
  train->add_flag("--resume", resume, "continue from out/checkpoint.bin");

  auto* sweep = app.add_subcommand("sweep", "train and evaluate every run of a spec");
  auto* sweep_seed = add_common(sweep, true);
  sweep->add_option("--workers", workers, "runs trained concurrently")->check(CLI::PositiveNumber);
  sweep->add_flag("--resume", resume, "skip finished runs, continue unfinished ones from their checkpoints");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint with sampled actions");
  std::string checkpoint;
  int episodes = 0;
  eval->add_option("checkpoint", checkpoint, "checkpoint.bin or parameter file")->required();
  auto* eval_seed = add_common(eval, false);
  auto* eval_episodes = eval->add_option("--episodes", episodes, "evaluation episodes");

  auto* verify = app.add_subcommand("verify-theorem", "check the effective-weight identity numerically");
  int samples = 10000;
  verify->add_option("--samples", samples, "random groups for the identity check")->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed_value, "sampling seed");

  auto* plot = app.add_subcommand("plot", "render SVG charts from a run directory");
  std::string plot_dir;
  plot->add_option("run_dir", plot_dir, "run directory (defaults to --out)");
  plot->add_option("--out", out, "run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  const auto maybe = [&](CLI::Option* opt) -> std::optional<std::uint64_t> {
    return opt->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
  };

  try {
    if (*train) return cmd_train(spec_path, out, maybe(train_seed), resume);
    if (*sweep) return cmd_sweep(spec_path, out, maybe(sweep_seed), workers, resume);
    if (*eval) {
      return cmd_eval(checkpoint, spec_path, maybe(eval_seed),
                      eval_episodes->count() ? std::optional<int>(episodes) : std::nullopt, out);
    }
    if (*verify) return cmd_verify(samples, seed_value);
    if (*plot) {
      const std::string dir = plot_dir.empty() ? out : plot_dir;
      if (dir.empty()) throw SpecError("plot: give a run directory");
      return cmd_plot(dir);
    }
  } catch (const SpecError& e) {
    std::cerr << "invalid spec: " << e.what() << "\n";
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
