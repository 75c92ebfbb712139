#include "cgrpo/group_advantage.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cgrpo {

std::string_view mode_name(AdvantageMode m) {
  return m == AdvantageMode::ScalarizedRewards ? "screw" : "scadv";
}

AdvantageMode parse_mode(std::string_view text) {
  if (text == "screw") return AdvantageMode::ScalarizedRewards;
  if (text == "scadv") return AdvantageMode::ScalarizedAdvantages;
  throw std::invalid_argument("unknown advantage mode '" + std::string(text) + "' (expected screw|scadv)");
}

void ComponentReturns::validate() const {
  if (components.empty()) throw std::invalid_argument("ComponentReturns: no components");
  const std::size_t g = components.front().size();
  if (g < 2) throw std::invalid_argument("ComponentReturns: group size must be >= 2");
  for (const auto& c : components) {
    if (c.size() != g) throw std::invalid_argument("ComponentReturns: ragged components");
  }
}

Standardized standardize_full(std::span<const double> values, double eps) {
  if (values.size() < 2) throw std::invalid_argument("standardize: group size must be >= 2");
  const double n = static_cast<double>(values.size());
  Standardized out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sigma = std::sqrt(ss / n);
  out.z.assign(values.size(), 0.0);
  if (out.sigma >= eps) {
    for (std::size_t i = 0; i < values.size(); ++i) out.z[i] = (values[i] - out.mean) / out.sigma;
  }
  return out;
}

std::vector<double> standardize(std::span<const double> values, double eps) {
  return standardize_full(values, eps).z;
}

std::vector<double> signed_weights(std::span<const double> lambdas) {
  std::vector<double> w(lambdas.begin(), lambdas.end());
  for (std::size_t j = 1; j < w.size(); ++j) w[j] = -w[j];
  return w;
}

GroupStats group_stats(const ComponentReturns& cr, std::span<const double> lambdas, double eps) {
  cr.validate();
  const std::size_t dim = cr.num_components();
  if (lambdas.size() != dim) throw std::invalid_argument("group_stats: lambda/component count mismatch");
  const std::size_t g = cr.group_size();
  GroupStats st;
  for (const auto& col : cr.components) {
    Standardized s = standardize_full(col, eps);
    st.mean.push_back(s.mean);
    st.sigma.push_back(s.sigma);
    st.z.push_back(std::move(s.z));
  }
  st.covariance.assign(dim * dim, 0.0);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < g; ++i) {
        s += (cr.components[a][i] - st.mean[a]) * (cr.components[b][i] - st.mean[b]);
      }
      st.covariance[a * dim + b] = st.covariance[b * dim + a] = s / static_cast<double>(g);
    }
  }
  const std::vector<double> w = signed_weights(lambdas);
  double var = 0.0;
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = 0; b < dim; ++b) var += w[a] * st.covariance[a * dim + b] * w[b];
  }
  st.sigma_rs = std::sqrt(std::max(var, 0.0));
  return st;
}

std::vector<double> to_penalty_frame(std::span<const double> raw_cov, std::size_t dim) {
  if (raw_cov.size() != dim * dim) throw std::invalid_argument("to_penalty_frame: bad covariance size");
  std::vector<double> out(raw_cov.begin(), raw_cov.end());
  for (std::size_t k = 1; k < dim; ++k) {
    out[k] = -out[k];
    out[k * dim] = -out[k * dim];
  }
  return out;
}

EffectiveWeights effective_weights(std::span<const double> sigmas, std::span<const double> lambdas,
                                   std::span<const double> penalty_frame_cov, double eps) {
  const std::size_t dim = lambdas.size();
  if (sigmas.size() != dim || penalty_frame_cov.size() != dim * dim) {
    throw std::invalid_argument("effective_weights: dimension mismatch");
  }
  double var = 0.0;
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = 0; b < dim; ++b) var += lambdas[a] * penalty_frame_cov[a * dim + b] * lambdas[b];
  }
  EffectiveWeights e;
  e.sigma_rs = std::sqrt(std::max(var, 0.0));
  e.signs.assign(dim, 1);
  for (std::size_t j = 1; j < dim; ++j) e.signs[j] = -1;
  e.defined = e.sigma_rs >= eps;
  if (!e.defined) {
    e.weights.assign(dim, std::nan(""));
    return e;
  }
  for (std::size_t j = 0; j < dim; ++j) e.weights.push_back(lambdas[j] * sigmas[j] / e.sigma_rs);
  return e;
}

EffectiveWeights scalarized_advantage_weights(std::span<const double> lambdas) {
  EffectiveWeights e;
  e.weights.assign(lambdas.begin(), lambdas.end());
  e.signs.assign(lambdas.size(), -1);
  if (!e.signs.empty()) e.signs[0] = 1;
  e.sigma_rs = std::nan("");
  e.defined = true;
  return e;
}

ScalarizedRewardResult scalarized_reward_advantage(const ComponentReturns& cr,
                                                   std::span<const double> lambdas, double eps) {
  ScalarizedRewardResult out;
  out.stats = group_stats(cr, lambdas, eps);
  const std::vector<double> w = signed_weights(lambdas);
  const std::size_t g = cr.group_size();
  std::vector<double> rs(g, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) rs[i] += w[j] * cr.components[j][i];
  }
  out.advantages = standardize(rs, eps);
  out.effective = effective_weights(out.stats.sigma, lambdas,
                                    to_penalty_frame(out.stats.covariance, cr.num_components()), eps);
  return out;
}

std::vector<double> scalarized_advantage(const ComponentReturns& cr, std::span<const double> lambdas,
                                         double eps) {
  cr.validate();
  if (lambdas.size() != cr.num_components()) {
    throw std::invalid_argument("scalarized_advantage: lambda/component count mismatch");
  }
  const std::vector<double> w = signed_weights(lambdas);
  std::vector<double> adv(cr.group_size(), 0.0);
  for (std::size_t j = 0; j < w.size(); ++j) {
    const std::vector<double> z = standardize(cr.components[j], eps);
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += w[j] * z[i];
  }
  return adv;
}

}  // namespace cgrpo
