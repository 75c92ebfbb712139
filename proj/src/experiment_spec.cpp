#include "cgrpo/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

namespace cgrpo {

namespace {

const std::vector<double> kSweepLambdaLava = {0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
const std::vector<double> kSweepLambdaBattery = {0.0, 0.1};

const ThresholdPair kBothTight = {0.01, 0.01};
const ThresholdPair kLavaOnly = {0.01, std::nullopt};
const ThresholdPair kLavaTightBatteryLoose = {0.01, 0.1};

[[noreturn]] void fail(const std::string& key, const std::string& what) { throw SpecError(key + ": " + what); }

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(key, "expected a finite number, got '" + std::string(s) + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, std::string_view s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(key, "expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  fail(key, "expected true|false, got '" + std::string(s) + "'");
}

std::string_view kind_name(RunKind k) {
  switch (k) {
    case RunKind::Single: return "single";
    case RunKind::Sweep: return "sweep";
    case RunKind::Constrained: return "constrained";
  }
  return "?";
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

std::string threshold_text(const std::optional<double>& t) { return t ? fmt(*t) : "none"; }

bool same_train(const TrainConfig& a, const TrainConfig& b) {
  const GridConfig& g = a.grid;
  const GridConfig& h = b.grid;
  return g.width == h.width && g.height == h.height && g.lava_fraction == h.lava_fraction &&
         g.max_steps == h.max_steps && g.battery_drain == h.battery_drain &&
         g.battery_recharge == h.battery_recharge && g.battery_low_threshold == h.battery_low_threshold &&
         g.goal_reward == h.goal_reward && a.updates == b.updates && a.groups == b.groups &&
         a.group_size == b.group_size && a.epochs == b.epochs && a.minibatch_timesteps == b.minibatch_timesteps &&
         a.loss.clip_eps == b.loss.clip_eps && a.loss.entropy_coef == b.loss.entropy_coef &&
         a.loss.kl_coef == b.loss.kl_coef && a.policy_lr == b.policy_lr && a.multiplier_lr == b.multiplier_lr &&
         a.multiplier_init_logit == b.multiplier_init_logit && a.shared_layouts == b.shared_layouts &&
         a.cost_return == b.cost_return && a.eval_episodes == b.eval_episodes && a.mode == b.mode &&
         a.fixed_lambda == b.fixed_lambda && a.thresholds == b.thresholds && a.seed == b.seed;
}

// One entry per config key, in serialization order.
struct Field {
  const char* key;
  const char* unit;
  std::function<std::string(const ExperimentSpec&)> get;
  std::function<void(ExperimentSpec&, const std::string&, std::string_view)> set;
};

template <typename Int>
Field int_field(const char* key, const char* unit, Int ExperimentSpec::*outer) {
  return {key, unit, [outer](const ExperimentSpec& s) { return std::to_string(s.*outer); },
          [outer](ExperimentSpec& s, const std::string& k, std::string_view v) { s.*outer = parse_int<Int>(k, v); }};
}

template <typename Sub, typename Int>
Field int_field(const char* key, const char* unit, Sub ExperimentSpec::*outer, Int Sub::*inner) {
  return {key, unit, [=](const ExperimentSpec& s) { return std::to_string(s.*outer.*inner); },
          [=](ExperimentSpec& s, const std::string& k, std::string_view v) { s.*outer.*inner = parse_int<Int>(k, v); }};
}

template <typename Sub>
Field double_field(const char* key, const char* unit, Sub ExperimentSpec::*outer, double Sub::*inner) {
  return {key, unit, [=](const ExperimentSpec& s) { return fmt(s.*outer.*inner); },
          [=](ExperimentSpec& s, const std::string& k, std::string_view v) { s.*outer.*inner = parse_double(k, v); }};
}

Field grid_double(const char* key, const char* unit, double GridConfig::*member) {
  return {key, unit, [=](const ExperimentSpec& s) { return fmt(s.train.grid.*member); },
          [=](ExperimentSpec& s, const std::string& k, std::string_view v) {
            s.train.grid.*member = parse_double(k, v);
          }};
}

Field grid_int(const char* key, const char* unit, int GridConfig::*member) {
  return {key, unit, [=](const ExperimentSpec& s) { return std::to_string(s.train.grid.*member); },
          [=](ExperimentSpec& s, const std::string& k, std::string_view v) {
            s.train.grid.*member = parse_int<int>(k, v);
          }};
}

Field loss_double(const char* key, const char* unit, double LossConfig::*member) {
  return {key, unit, [=](const ExperimentSpec& s) { return fmt(s.train.loss.*member); },
          [=](ExperimentSpec& s, const std::string& k, std::string_view v) {
            s.train.loss.*member = parse_double(k, v);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    v.push_back(int_field("version", "format version", &ExperimentSpec::version));
    v.push_back({"kind", "single | sweep | constrained",
                 [](const ExperimentSpec& s) { return std::string(kind_name(s.kind)); },
                 [](ExperimentSpec& s, const std::string& k, std::string_view t) {
                   if (t == "single") s.kind = RunKind::Single;
                   else if (t == "sweep") s.kind = RunKind::Sweep;
                   else if (t == "constrained") s.kind = RunKind::Constrained;
                   else fail(k, "expected single|sweep|constrained, got '" + std::string(t) + "'");
                 }});
    v.push_back({"preset", "none | paper-fig2 | paper-fig3 | paper-fig4 | paper-fig5 | paper-thresholds",
                 [](const ExperimentSpec& s) { return s.preset; },
                 // applied before all other keys in parse_spec
                 [](ExperimentSpec&, const std::string&, std::string_view) {}});
    v.push_back({"modes", "comma list of screw | scadv",
                 [](const ExperimentSpec& s) {
                   std::string out;
                   for (std::size_t i = 0; i < s.modes.size(); ++i) out += (i ? "," : "") + std::string(mode_name(s.modes[i]));
                   return out;
                 },
                 [](ExperimentSpec& s, const std::string& k, std::string_view t) {
                   s.modes.clear();
                   for (auto m : split(t, ',')) {
                     try {
                       s.modes.push_back(parse_mode(m));
                     } catch (const std::invalid_argument& e) {
                       fail(k, e.what());
                     }
                   }
                 }});
    v.push_back({"lambda_lava", "penalty weights, comma list",
                 [](const ExperimentSpec& s) { return join_doubles(s.lambda_lava); },
                 [](ExperimentSpec& s, const std::string& k, std::string_view t) {
                   s.lambda_lava.clear();
                   for (auto x : split(t, ',')) s.lambda_lava.push_back(parse_double(k, x));
                 }});
    v.push_back({"lambda_battery", "penalty weights, comma list",
                 [](const ExperimentSpec& s) { return join_doubles(s.lambda_battery); },
                 [](ExperimentSpec& s, const std::string& k, std::string_view t) {
                   s.lambda_battery.clear();
                   for (auto x : split(t, ',')) s.lambda_battery.push_back(parse_double(k, x));
                 }});
    v.push_back({"thresholds", "per-step rates d_lava:d_battery, ';' separated, 'none' = unconstrained",
                 [](const ExperimentSpec& s) {
                   std::string out;
                   for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
                     out += (i ? ";" : "") + threshold_text(s.thresholds[i][kLava]) + ":" +
                            threshold_text(s.thresholds[i][kBattery]);
                   }
                   return out;
                 },
                 [](ExperimentSpec& s, const std::string& k, std::string_view t) {
                   s.thresholds.clear();
                   for (auto pair : split(t, ';')) {
                     const auto parts = split(pair, ':');
                     if (parts.size() != kNumCosts) fail(k, "expected d_lava:d_battery, got '" + std::string(pair) + "'");
                     ThresholdPair tp;
                     for (std::size_t c = 0; c < kNumCosts; ++c) {
                       if (parts[c] != "none") tp[c] = parse_double(k, parts[c]);
                     }
                     s.thresholds.push_back(tp);
                   }
                 }});
    v.push_back({"seeds", "master seeds, comma list",
                 [](const ExperimentSpec& s) {
                   std::string out;
                   for (std::size_t i = 0; i < s.seeds.size(); ++i) out += (i ? "," : "") + std::to_string(s.seeds[i]);
                   return out;
                 },
                 [](ExperimentSpec& s, const std::string& k, std::string_view t) {
                   s.seeds.clear();
                   for (auto x : split(t, ',')) s.seeds.push_back(parse_int<std::uint64_t>(k, x));
                 }});
    v.push_back(int_field("checkpoint_every", "updates", &ExperimentSpec::checkpoint_every));
    v.push_back(int_field("updates", "policy updates", &ExperimentSpec::train, &TrainConfig::updates));
    v.push_back(int_field("groups", "groups per update", &ExperimentSpec::train, &TrainConfig::groups));
    v.push_back(int_field("group_size", "episodes per group", &ExperimentSpec::train, &TrainConfig::group_size));
    v.push_back(int_field("epochs", "passes over each batch", &ExperimentSpec::train, &TrainConfig::epochs));
    v.push_back(int_field("minibatch_timesteps", "timesteps", &ExperimentSpec::train,
                          &TrainConfig::minibatch_timesteps));
    v.push_back(loss_double("clip_eps", "ratio", &LossConfig::clip_eps));
    v.push_back(loss_double("entropy_coef", "coefficient", &LossConfig::entropy_coef));
    v.push_back(loss_double("kl_coef", "coefficient", &LossConfig::kl_coef));
    v.push_back(double_field("policy_lr", "Adam step size", &ExperimentSpec::train, &TrainConfig::policy_lr));
    v.push_back(double_field("multiplier_lr", "Adam step size", &ExperimentSpec::train, &TrainConfig::multiplier_lr));
    v.push_back(double_field("multiplier_init_logit", "logit", &ExperimentSpec::train,
                             &TrainConfig::multiplier_init_logit));
    v.push_back({"shared_layouts", "true | false",
                 [](const ExperimentSpec& s) { return std::string(s.train.shared_layouts ? "true" : "false"); },
                 [](ExperimentSpec& s, const std::string& k, std::string_view t) {
                   s.train.shared_layouts = parse_bool(k, t);
                 }});
    v.push_back({"cost_return", "sum | rate",
                 [](const ExperimentSpec& s) {
                   return std::string(s.train.cost_return == CostReturn::Sum ? "sum" : "rate");
                 },
                 [](ExperimentSpec& s, const std::string& k, std::string_view t) {
                   if (t == "sum") s.train.cost_return = CostReturn::Sum;
                   else if (t == "rate") s.train.cost_return = CostReturn::Rate;
                   else fail(k, "expected sum|rate, got '" + std::string(t) + "'");
                 }});
    v.push_back(int_field("eval_episodes", "episodes", &ExperimentSpec::train, &TrainConfig::eval_episodes));
    v.push_back(grid_int("grid_width", "cells", &GridConfig::width));
    v.push_back(grid_int("grid_height", "cells", &GridConfig::height));
    v.push_back(grid_double("lava_fraction", "fraction of cells", &GridConfig::lava_fraction));
    v.push_back(grid_int("max_steps", "steps per episode", &GridConfig::max_steps));
    v.push_back(grid_double("battery_drain", "charge per move", &GridConfig::battery_drain));
    v.push_back(grid_double("battery_recharge", "charge per stay", &GridConfig::battery_recharge));
    v.push_back(grid_double("battery_low_threshold", "charge", &GridConfig::battery_low_threshold));
    v.push_back(grid_double("goal_reward", "reward", &GridConfig::goal_reward));
    return v;
  }();
  return f;
}

std::string preset_of_text(std::string_view text) {
  std::string found = "none";
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string_view l = line;
    l = trim(l.substr(0, l.find('#')));
    const auto eq = l.find('=');
    if (eq != std::string_view::npos && trim(l.substr(0, eq)) == "preset") found = std::string(trim(l.substr(eq + 1)));
  }
  return found;
}

}  // namespace

bool ExperimentSpec::operator==(const ExperimentSpec& o) const {
  return version == o.version && kind == o.kind && preset == o.preset && modes == o.modes &&
         lambda_lava == o.lambda_lava && lambda_battery == o.lambda_battery && thresholds == o.thresholds &&
         seeds == o.seeds && checkpoint_every == o.checkpoint_every && same_train(train, o.train);
}

void apply_preset(ExperimentSpec& spec, std::string_view preset) {
  if (preset == "none") {
    spec.preset = "none";
    return;
  }
  if (preset == "paper-fig2") {
    spec.kind = RunKind::Sweep;
    spec.lambda_lava = kSweepLambdaLava;
    spec.lambda_battery = kSweepLambdaBattery;
    spec.thresholds.clear();
  } else if (preset == "paper-fig3") {
    spec.kind = RunKind::Constrained;
    spec.thresholds = {kBothTight};
  } else if (preset == "paper-fig4") {
    spec.kind = RunKind::Constrained;
    spec.thresholds = {kLavaOnly};
  } else if (preset == "paper-fig5") {
    spec.kind = RunKind::Constrained;
    spec.thresholds = {kLavaTightBatteryLoose};
  } else if (preset == "paper-thresholds") {
    spec.kind = RunKind::Constrained;
    spec.thresholds = {kBothTight, kLavaOnly, kLavaTightBatteryLoose};
  } else {
    fail("preset", "unknown preset '" + std::string(preset) + "'");
  }
  spec.preset = std::string(preset);
  spec.seeds = {0, 1, 2, 3, 4};
}

void ExperimentSpec::validate() const {
  if (version != kVersion) fail("version", "unsupported version " + std::to_string(version));
  if (modes.empty()) fail("modes", "must not be empty");
  if (seeds.empty()) fail("seeds", "must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) fail("seeds", "duplicate seed");
  if (checkpoint_every < 1) fail("checkpoint_every", "must be >= 1");
  for (double l : lambda_lava) {
    if (l < 0.0) fail("lambda_lava", "weights must be >= 0");
  }
  for (double l : lambda_battery) {
    if (l < 0.0) fail("lambda_battery", "weights must be >= 0");
  }
  const bool constrained = !thresholds.empty();
  if (!constrained && (lambda_lava.empty() || lambda_battery.empty())) {
    fail("lambda_lava/lambda_battery", "fixed-weight runs need at least one value each");
  }
  if (kind == RunKind::Sweep && constrained) fail("thresholds", "must be empty for kind = sweep");
  if (kind == RunKind::Constrained && !constrained) fail("thresholds", "kind = constrained needs at least one pair");
  if (kind == RunKind::Single) {
    const std::size_t points = constrained ? thresholds.size() : lambda_lava.size() * lambda_battery.size();
    if (points != 1) fail("kind", "single runs take exactly one config point");
  }
  for (const auto& tp : thresholds) {
    if (!tp[kLava] && !tp[kBattery]) fail("thresholds", "each pair must constrain at least one channel");
    for (const auto& t : tp) {
      if (t && (*t < 0.0 || *t > 1.0)) fail("thresholds", "rates must be in [0, 1]");
    }
  }
  if (preset != "none") {
    ExperimentSpec ref;
    apply_preset(ref, preset);
    if (ref.kind != kind) fail("kind", "does not match preset " + preset);
    if (preset == "paper-fig2" && (lambda_lava != ref.lambda_lava || lambda_battery != ref.lambda_battery)) {
      fail("lambda_lava/lambda_battery", "sweep grid must match preset " + preset);
    }
    if (thresholds != ref.thresholds) fail("thresholds", "must match preset " + preset);
  }
  // Hyperparameters: validate one representative cell configuration.
  TrainConfig probe = train;
  probe.fixed_lambda.reset();
  probe.thresholds.reset();
  if (constrained) {
    probe.thresholds = thresholds.front();
  } else {
    probe.fixed_lambda = std::array<double, kNumCosts>{lambda_lava.front(), lambda_battery.front()};
  }
  try {
    probe.validate();
  } catch (const std::invalid_argument& e) {
    throw SpecError(e.what());
  }
}

ExperimentSpec parse_spec(std::string_view text) {
  ExperimentSpec spec;
  apply_preset(spec, preset_of_text(text));

  std::map<std::string, const Field*> by_key;
  for (const Field& f : fields()) by_key[f.key] = &f;

  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view l = line;
    l = trim(l.substr(0, l.find('#')));
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw SpecError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key(trim(l.substr(0, eq)));
    const std::string_view value = trim(l.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) fail(key, "unknown key (line " + std::to_string(lineno) + ")");
    if (!seen.insert(key).second) fail(key, "given more than once");
    it->second->set(spec, key, value);
  }
  if (!seen.count("version")) fail("version", "missing");
  spec.validate();
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot read spec file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

std::string serialize_spec(const ExperimentSpec& spec) {
  std::string out = "# cgrpo experiment spec\n";
  for (const Field& f : fields()) {
    std::string line = std::string(f.key) + " = " + f.get(spec);
    if (line.size() < 40) line.resize(40, ' ');
    out += line + "  # " + f.unit + "\n";
  }
  return out;
}

std::vector<RunCell> enumerate_cells(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<RunCell> cells;
  const auto add = [&](AdvantageMode mode, const std::string& point, std::uint64_t seed, auto&& fill) {
    RunCell c;
    c.config = spec.train;
    c.config.mode = mode;
    c.config.seed = seed;
    c.config.fixed_lambda.reset();
    c.config.thresholds.reset();
    fill(c.config);
    c.name = std::string(mode_name(mode)) + "_" + point + "_s" + std::to_string(seed);
    cells.push_back(std::move(c));
  };
  for (AdvantageMode mode : spec.modes) {
    if (spec.thresholds.empty()) {
      for (double lb : spec.lambda_battery) {
        for (double ll : spec.lambda_lava) {
          for (std::uint64_t seed : spec.seeds) {
            add(mode, "ll" + fmt(ll) + "_lb" + fmt(lb), seed, [&](TrainConfig& t) {
              t.fixed_lambda = std::array<double, kNumCosts>{ll, lb};
            });
          }
        }
      }
    } else {
      for (const ThresholdPair& tp : spec.thresholds) {
        for (std::uint64_t seed : spec.seeds) {
          add(mode, "dl" + threshold_text(tp[kLava]) + "_db" + threshold_text(tp[kBattery]), seed,
              [&](TrainConfig& t) { t.thresholds = tp; });
        }
      }
    }
  }
  return cells;
}

}  // namespace cgrpo
