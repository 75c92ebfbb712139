#include "cgrpo/experiment.hpp"

#include "cgrpo/csv.hpp"
#include "cgrpo/rng.hpp"

#include <openssl/evp.h>
#include <omp.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace cgrpo {

namespace fs = std::filesystem;

namespace {

constexpr int kEvalBatch = 64;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "none"; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

/// Spec describing exactly one cell, so config.txt can be fed back to `train`.
ExperimentSpec cell_spec(const ExperimentSpec& parent, const RunCell& cell) {
  ExperimentSpec s = parent;
  s.preset = "none";
  s.kind = RunKind::Single;
  s.modes = {cell.config.mode};
  s.seeds = {cell.config.seed};
  s.train = cell.config;
  s.train.fixed_lambda.reset();
  s.train.thresholds.reset();
  if (cell.config.fixed_lambda) {
    s.thresholds.clear();
    s.lambda_lava = {(*cell.config.fixed_lambda)[kLava]};
    s.lambda_battery = {(*cell.config.fixed_lambda)[kBattery]};
  } else {
    s.thresholds = {*cell.config.thresholds};
  }
  return s;
}

}  // namespace

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string manifest_text(const ExperimentSpec& spec) {
  const std::string resolved = serialize_spec(spec);
  const std::vector<RunCell> cells = enumerate_cells(spec);
  std::string body = "# resolved spec\n" + resolved + "# cells\n";
  body += "cells = " + std::to_string(cells.size()) + "\n";
  for (const RunCell& c : cells) body += "cell = " + c.name + "\n";
  return "# cgrpo experiment manifest\ninput_hash = " + git_blob_hash(resolved) + "\n" + body;
}

EvalReport evaluate_policy(const MlpParams& policy, const GridConfig& grid, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  if (const auto bad = first_nonfinite_block(policy)) {
    throw NonFiniteError("evaluate: non-finite parameters in block " + std::string(*bad));
  }
  const GridWorld world(grid);
  const int batches = (episodes + kEvalBatch - 1) / kEvalBatch;
  std::vector<GroupBatch> results(static_cast<std::size_t>(batches));
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < batches; ++b) {
    try {
      const int begin = b * kEvalBatch;
      const int end = std::min(episodes, begin + kEvalBatch);
      std::vector<std::uint64_t> layout, sampling;
      for (int i = begin; i < end; ++i) {
        const auto ui = static_cast<std::uint64_t>(i);
        layout.push_back(derive_seed(seed, Domain::Eval, {ui}));
        sampling.push_back(derive_seed(seed, Domain::EvalSampling, {ui}));
      }
      results[static_cast<std::size_t>(b)] = collect_group(world, policy, layout, sampling);
    } catch (...) {
#pragma omp critical(cgrpo_eval_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  EvalReport r;
  r.seed = seed;
  r.episodes = episodes;
  std::int64_t goals = 0, steps = 0, lava = 0, battery = 0;
  for (const GroupBatch& g : results) {
    for (const Trajectory& t : g.members) {
      goals += t.reached_goal ? 1 : 0;
      steps += static_cast<std::int64_t>(t.length());
      lava += t.events(kLava);
      battery += t.events(kBattery);
    }
  }
  r.goal_rate = static_cast<double>(goals) / episodes;
  r.lava_rate = static_cast<double>(lava) / static_cast<double>(steps);
  r.battery_rate = static_cast<double>(battery) / static_cast<double>(steps);
  r.mean_episode_len = static_cast<double>(steps) / episodes;
  return r;
}

MlpParams load_policy(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in) throw CheckpointError(path.string() + ": file too short to be a checkpoint");
  try {
    if (std::memcmp(magic, "CGRPOCKP", 8) == 0) {
      std::uint32_t version = 0;
      std::int64_t updates = 0;
      in.read(reinterpret_cast<char*>(&version), sizeof(version));
      in.read(reinterpret_cast<char*>(&updates), sizeof(updates));
      if (!in || version != 1) throw CheckpointError("unsupported trainer checkpoint header");
    } else {
      in.seekg(0);
    }
    MlpParams p = load_params(in);
    if (const auto bad = first_nonfinite_block(p)) throw CheckpointError("non-finite values in block " + std::string(*bad));
    return p;
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void write_eval_csv(const fs::path& path, const EvalReport& r, const RunCell* cell) {
  std::optional<double> ll, lb, dl, db;
  std::string name = "none", mode = "none";
  if (cell != nullptr) {
    name = cell->name;
    mode = std::string(mode_name(cell->config.mode));
    if (cell->config.fixed_lambda) {
      ll = (*cell->config.fixed_lambda)[kLava];
      lb = (*cell->config.fixed_lambda)[kBattery];
    }
    if (cell->config.thresholds) {
      dl = (*cell->config.thresholds)[kLava];
      db = (*cell->config.thresholds)[kBattery];
    }
  }
  std::ostringstream os;
  os << "cell,mode,lambda_lava,lambda_battery,d_lava,d_battery,seed,episodes,goal_rate,lava_rate_per_step,"
        "battery_rate_per_step,mean_episode_len\n";
  os << name << ',' << mode << ',' << opt_num(ll) << ',' << opt_num(lb) << ',' << opt_num(dl) << ','
     << opt_num(db) << ',' << r.seed << ',' << r.episodes << ',' << num(r.goal_rate) << ',' << num(r.lava_rate)
     << ',' << num(r.battery_rate) << ',' << num(r.mean_episode_len) << '\n';
  write_file(path, os.str());
}

EvalReport read_eval_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  t.require({"seed", "episodes", "goal_rate", "lava_rate_per_step", "battery_rate_per_step", "mean_episode_len"});
  if (t.rows.size() != 1) throw std::runtime_error(path.string() + ": expected one data row");
  EvalReport r;
  r.seed = std::stoull(t.at(0, "seed"));
  r.episodes = std::stoi(t.at(0, "episodes"));
  r.goal_rate = t.number(0, "goal_rate");
  r.lava_rate = t.number(0, "lava_rate_per_step");
  r.battery_rate = t.number(0, "battery_rate_per_step");
  r.mean_episode_len = t.number(0, "mean_episode_len");
  return r;
}

void run_experiment(const ExperimentSpec& spec, const RunOptions& opts) {
  spec.validate();
  if (opts.workers < 1) throw SpecError("workers: must be >= 1");
  fs::create_directories(opts.out_dir);

  const std::string manifest = manifest_text(spec);
  const fs::path manifest_path = opts.out_dir / "manifest.txt";
  if (opts.resume && fs::exists(manifest_path) && read_file(manifest_path) != manifest) {
    throw SpecError("resume: " + manifest_path.string() + " was written for a different spec");
  }
  write_file(manifest_path, manifest);

  const std::vector<RunCell> cells = enumerate_cells(spec);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> finished{0};
  std::mutex mu;
  std::exception_ptr error;

  const auto worker = [&](bool single_threaded_kernels) {
    if (single_threaded_kernels) omp_set_num_threads(1);
    while (!stop) {
      const std::size_t i = next++;
      if (i >= cells.size()) break;
      const RunCell& cell = cells[i];
      try {
        const fs::path dir = opts.out_dir / cell.name;
        const fs::path eval_path = dir / "eval.csv";
        bool skipped = false;
        if (opts.resume && fs::exists(eval_path)) {
          skipped = true;
        } else {
          fs::create_directories(dir);
          write_file(dir / "config.txt", serialize_spec(cell_spec(spec, cell)));
          TrainLoopOptions lo;
          lo.out_dir = dir;
          lo.checkpoint_every = spec.checkpoint_every;
          lo.resume = opts.resume;
          const MlpParams policy = train_loop(cell.config, lo);
          const EvalReport rep = evaluate_policy(policy, cell.config.grid, cell.config.eval_episodes, cell.config.seed);
          write_eval_csv(eval_path, rep, &cell);
        }
        const std::size_t done = ++finished;
        if (!opts.quiet) {
          const EvalReport rep = read_eval_csv(eval_path);
          std::lock_guard<std::mutex> lock(mu);
          std::cerr << "[" << done << "/" << cells.size() << "] " << cell.name << (skipped ? " (done earlier)" : "")
                    << " goal=" << num(rep.goal_rate) << " lava=" << num(rep.lava_rate)
                    << " battery=" << num(rep.battery_rate) << "\n";
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };

  const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(opts.workers), cells.size()));
  if (threads <= 1) {
    worker(false);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, true);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  write_summary(opts.out_dir);
}

void write_summary(const fs::path& run_dir) {
  using Key = std::tuple<std::string, double, double, double, double>;
  struct Acc {
    std::vector<double> goal, lava, battery, len;
  };
  // NaN would break ordering; "none" sorts as -1.
  const auto key_part = [](double v) { return std::isnan(v) ? -1.0 : v; };

  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "eval.csv")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::map<Key, Acc> groups;
  for (const fs::path& d : dirs) {
    const CsvTable t = read_csv(d / "eval.csv");
    t.require({"mode", "lambda_lava", "lambda_battery", "d_lava", "d_battery", "goal_rate", "lava_rate_per_step",
               "battery_rate_per_step", "mean_episode_len"});
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      Key k{t.at(r, "mode"), key_part(t.number(r, "lambda_lava")), key_part(t.number(r, "lambda_battery")),
            key_part(t.number(r, "d_lava")), key_part(t.number(r, "d_battery"))};
      Acc& a = groups[k];
      a.goal.push_back(t.number(r, "goal_rate"));
      a.lava.push_back(t.number(r, "lava_rate_per_step"));
      a.battery.push_back(t.number(r, "battery_rate_per_step"));
      a.len.push_back(t.number(r, "mean_episode_len"));
    }
  }

  const auto stats = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return std::array<double, 3>{mean, sd, sd / std::sqrt(n)};
  };
  const auto back = [](double v) { return v < 0.0 ? std::string("none") : num(v); };

  std::ostringstream os;
  os << "mode,lambda_lava,lambda_battery,d_lava,d_battery,seeds";
  for (const char* m : {"goal_rate", "lava_rate_per_step", "battery_rate_per_step", "mean_episode_len"}) {
    os << ',' << m << "_mean," << m << "_std," << m << "_stderr";
  }
  os << '\n';
  for (const auto& [k, a] : groups) {
    os << std::get<0>(k) << ',' << back(std::get<1>(k)) << ',' << back(std::get<2>(k)) << ','
       << back(std::get<3>(k)) << ',' << back(std::get<4>(k)) << ',' << a.goal.size();
    for (const auto* v : {&a.goal, &a.lava, &a.battery, &a.len}) {
      for (double s : stats(*v)) os << ',' << num(s);
    }
    os << '\n';
  }
  write_file(run_dir / "summary.csv", os.str());
}

}  // namespace cgrpo
