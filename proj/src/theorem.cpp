#include "cgrpo/experiment.hpp"

#include "cgrpo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace cgrpo {

namespace {

constexpr double kIdentityTol = 1e-9;
constexpr double kMeanTol = 1e-9;
constexpr double kInvarianceTol = 1e-12;
constexpr double kChangeTol = 1e-6;
constexpr double kActiveLambda = 0.01;
constexpr int kMinScaleGroups = 1000;

// Worked example: two components, penalty-frame correlation 0.1.
constexpr double kExampleLambda[2] = {0.3, 0.7};
constexpr double kExampleSigma[2] = {0.5, 0.2};
constexpr double kExampleRho = 0.1;
constexpr double kExampleSigmaRs = 0.215174;
constexpr double kExampleWeights[2] = {0.697, 0.651};

std::vector<double> random_simplex(Rng& rng, std::size_t dim) {
  std::vector<double> w(dim);
  double sum = 0.0;
  for (double& x : w) {
    x = -std::log(1.0 - rng.uniform01());
    sum += x;
  }
  for (double& x : w) x /= sum;
  return w;
}

std::size_t pick(Rng& rng, std::initializer_list<std::size_t> options) {
  return *(options.begin() + rng.index(options.size()));
}

/// Independent normal components with log-uniform scales in [lo, hi].
ComponentReturns continuous_group(Rng& rng, std::size_t g, std::size_t dim, double lo, double hi) {
  ComponentReturns cr;
  for (std::size_t j = 0; j < dim; ++j) {
    const double scale = std::exp(rng.uniform(std::log(lo), std::log(hi)));
    const double shift = rng.uniform(-5.0, 5.0);
    std::vector<double> col(g);
    for (double& v : col) v = shift + scale * rng.normal();
    cr.components.push_back(std::move(col));
  }
  return cr;
}

/// Binary reward and small-integer cost counts, like gridworld returns.
ComponentReturns discrete_group(Rng& rng, std::size_t g, std::size_t dim) {
  ComponentReturns cr;
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<double> col(g);
    for (double& v : col) v = static_cast<double>(rng.index(j == 0 ? 2 : 6));
    cr.components.push_back(std::move(col));
  }
  return cr;
}

/// Some or all components constant.
ComponentReturns constant_group(Rng& rng, std::size_t g, std::size_t dim) {
  ComponentReturns cr = continuous_group(rng, g, dim, 0.1, 10.0);
  const bool all = rng.uniform01() < 0.5;
  for (std::size_t j = 0; j < dim; ++j) {
    if (all || rng.uniform01() < 0.5) std::fill(cr.components[j].begin(), cr.components[j].end(), rng.uniform(-3.0, 3.0));
  }
  return cr;
}

double abs_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return std::abs(s / static_cast<double>(v.size()));
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

}  // namespace

TheoremReport verify_theorem(int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("verify-theorem: samples must be >= 1");
  TheoremReport rep;

  {
    const double cross = kExampleRho * kExampleSigma[0] * kExampleSigma[1];
    const std::vector<double> cov = {kExampleSigma[0] * kExampleSigma[0], cross, cross,
                                     kExampleSigma[1] * kExampleSigma[1]};
    const EffectiveWeights e = effective_weights(kExampleSigma, kExampleLambda, cov);
    rep.example_sigma_rs = e.sigma_rs;
    rep.example_weights = e.weights;
    rep.example_ok = e.defined && std::abs(e.sigma_rs - kExampleSigmaRs) < 1e-6 &&
                      std::abs(e.weights[0] - kExampleWeights[0]) < 1e-3 &&
                      std::abs(e.weights[1] - kExampleWeights[1]) < 1e-3;
  }

  Rng rng(derive_seed(seed, Domain::Test, {1}));
  for (int s = 0; s < samples; ++s) {
    const std::size_t g = pick(rng, {4, 8, 16});
    const std::size_t dim = 1 + pick(rng, {1, 2, 3});
    const std::vector<double> lambda = random_simplex(rng, dim);
    const double u = rng.uniform01();
    const ComponentReturns cr = u < 0.6   ? continuous_group(rng, g, dim, 1e-2, 1e2)
                                : u < 0.9 ? discrete_group(rng, g, dim)
                                          : constant_group(rng, g, dim);
    ++rep.groups;

    const ScalarizedRewardResult res = scalarized_reward_advantage(cr, lambda);
    const std::vector<double> w = signed_weights(lambda);
    std::vector<double> rs(g, 0.0);
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t j = 0; j < dim; ++j) rs[i] += w[j] * cr.components[j][i];
    }
    const double direct_sigma = standardize_full(rs).sigma;

    const std::vector<double> scadv = scalarized_advantage(cr, lambda);
    bool any_component = false;
    for (const auto& z : res.stats.z) any_component = any_component || std::any_of(z.begin(), z.end(), [](double x) { return x != 0.0; });
    if (any_component) rep.max_mean_abs = std::max(rep.max_mean_abs, abs_mean(scadv));

    if (direct_sigma < kStdEps || !res.effective.defined) {
      ++rep.degenerate_groups;
      // Guard: no advantage signal at all from a flat scalarized return.
      if (direct_sigma < kStdEps) {
        for (double a : res.advantages) rep.max_identity_residual = std::max(rep.max_identity_residual, std::abs(a));
      }
      continue;
    }
    rep.max_self_consistency_residual =
        std::max(rep.max_self_consistency_residual, std::abs(direct_sigma - res.effective.sigma_rs));
    rep.max_mean_abs = std::max(rep.max_mean_abs, abs_mean(res.advantages));
    for (std::size_t i = 0; i < g; ++i) {
      double expanded = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        expanded += res.effective.signs[j] * res.effective.weights[j] * res.stats.z[j][i];
      }
      rep.max_identity_residual = std::max(rep.max_identity_residual, std::abs(res.advantages[i] - expanded));
    }
  }

  // Rescaling one cost channel: invisible to per-component standardization,
  // visible once components are summed before standardizing.
  const int scale_groups = std::max(kMinScaleGroups, samples / 10);
  Rng srng(derive_seed(seed, Domain::Test, {2}));
  rep.min_screw_change = std::numeric_limits<double>::infinity();
  for (int s = 0; s < scale_groups; ++s) {
    const std::size_t g = pick(srng, {4, 8, 16});
    const std::size_t dim = 1 + pick(srng, {1, 2, 3});
    const std::vector<double> lambda = random_simplex(srng, dim);
    const ComponentReturns cr = continuous_group(srng, g, dim, 0.1, 10.0);
    const std::size_t k = 1 + srng.index(dim - 1);
    const std::vector<double> base_scadv = scalarized_advantage(cr, lambda);
    const ScalarizedRewardResult base_screw = scalarized_reward_advantage(cr, lambda);
    bool nondegenerate = base_screw.effective.defined;
    for (double sigma : base_screw.stats.sigma) nondegenerate = nondegenerate && sigma >= kStdEps;

    for (double c : {0.1, 10.0}) {
      ComponentReturns scaled = cr;
      for (double& v : scaled.components[k]) v *= c;
      ++rep.scale_checks;
      const double d_scadv = max_abs_diff(base_scadv, scalarized_advantage(scaled, lambda));
      rep.max_scadv_change = std::max(rep.max_scadv_change, d_scadv);
      bool failed = d_scadv >= kInvarianceTol;
      if (lambda[k] > kActiveLambda && nondegenerate) {
        ++rep.scale_checked_screw;
        const double d_screw = max_abs_diff(base_screw.advantages, scalarized_reward_advantage(scaled, lambda).advantages);
        rep.min_screw_change = std::min(rep.min_screw_change, d_screw);
        failed = failed || d_screw <= kChangeTol;
      }
      if (failed) ++rep.scale_failures;
    }
  }
  if (rep.scale_checked_screw == 0) rep.min_screw_change = std::nan("");

  rep.ok = rep.example_ok && rep.max_identity_residual < kIdentityTol && rep.max_mean_abs < kMeanTol &&
           rep.max_scadv_change < kInvarianceTol && rep.scale_failures == 0;
  return rep;
}

std::string TheoremReport::text() const {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "worked example: sigma_RS = %.6f, effective weights = (%.4f, %.4f) -> %s\n",
                example_sigma_rs, example_weights.size() > 0 ? example_weights[0] : std::nan(""),
                example_weights.size() > 1 ? example_weights[1] : std::nan(""), example_ok ? "ok" : "FAIL");
  os << buf;
  os << "identity: " << groups << " groups, " << degenerate_groups << " degenerate (guarded), max |A - sum e_j Z_j| = "
     << sci(max_identity_residual) << " (tol " << sci(kIdentityTol) << ")\n";
  os << "sigma_RS covariance vs direct: max diff " << sci(max_self_consistency_residual) << "\n";
  os << "advantage means: max |mean A| = " << sci(max_mean_abs) << " (tol " << sci(kMeanTol) << ")\n";
  os << "scale contrast: " << scale_checks << " rescalings, scadv max change " << sci(max_scadv_change) << " (tol "
     << sci(kInvarianceTol) << "), screw min change " << sci(min_screw_change) << " over " << scale_checked_screw
     << " active checks (must exceed " << sci(kChangeTol) << "), " << scale_failures << " failures\n";
  os << (ok ? "PASS" : "FAIL") << "\n";
  return os.str();
}

}  // namespace cgrpo
