#ifndef CGRPO_GROUP_ADVANTAGE_HPP_
#define CGRPO_GROUP_ADVANTAGE_HPP_

#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace cgrpo {

/// Below this a within-group standard deviation counts as zero.
inline constexpr double kStdEps = 1e-8;

enum class AdvantageMode { ScalarizedRewards, ScalarizedAdvantages };

std::string_view mode_name(AdvantageMode m);      // "screw" / "scadv"
AdvantageMode parse_mode(std::string_view text);  // throws std::invalid_argument

/// Outcome returns of one group. components[0] is the reward R_i,
/// components[k] (k >= 1) the k-th cost return C_i,k. All columns have the
/// same length G.
struct ComponentReturns {
  std::vector<std::vector<double>> components;

  std::size_t group_size() const { return components.empty() ? 0 : components.front().size(); }
  std::size_t num_components() const { return components.size(); }
  void validate() const;
};

/// Population mean / std and z-scores of one value list.
struct Standardized {
  double mean = 0.0;
  double sigma = 0.0;
  std::vector<double> z;
  bool degenerate() const { return z.empty() ? true : sigma < kStdEps; }
};

/// z_i = (v_i - mean) / sigma with population sigma; all zeros when
/// sigma < eps. Throws std::invalid_argument for fewer than two values.
Standardized standardize_full(std::span<const double> values, double eps = kStdEps);
std::vector<double> standardize(std::span<const double> values, double eps = kStdEps);

/// Per-component weights as they enter the scalarized return
/// R_S = sum_j w_j x_j: w = (lambda_R, -lambda_1, ..., -lambda_K).
std::vector<double> signed_weights(std::span<const double> lambdas);

struct GroupStats {
  std::vector<double> mean;             // per component
  std::vector<double> sigma;            // population std per component
  std::vector<std::vector<double>> z;   // per component z-scores
  std::vector<double> covariance;       // (K+1)^2 row-major, raw components
  double sigma_rs = 0.0;                // std of the scalarized return
};

GroupStats group_stats(const ComponentReturns& cr, std::span<const double> lambdas, double eps = kStdEps);

/// Coefficients multiplying each Z_j inside the scalarized-reward advantage.
/// `weights` holds |w_j| sigma_j / sigma_RS and `signs` the sign of w_j.
/// When sigma_RS < eps the weights are undefined for the group and
/// `defined` is false.
struct EffectiveWeights {
  std::vector<double> weights;
  std::vector<int> signs;
  double sigma_rs = 0.0;
  bool defined = false;
};

/// Effective weights from lambdas >= 0, per-component sigmas, and the
/// covariance of the terms *as they enter the scalarization*
/// (R, -C_1, ..., -C_K), i.e. sigma_RS^2 = lambda^T cov lambda.
EffectiveWeights effective_weights(std::span<const double> sigmas, std::span<const double> lambdas,
                                   std::span<const double> penalty_frame_cov, double eps = kStdEps);

/// Converts a raw-component covariance to the penalty frame by negating
/// the reward/cost cross terms.
std::vector<double> to_penalty_frame(std::span<const double> raw_cov, std::size_t dim);

/// Effective weights in scalarized-advantage mode are the multipliers.
EffectiveWeights scalarized_advantage_weights(std::span<const double> lambdas);

struct ScalarizedRewardResult {
  std::vector<double> advantages;
  GroupStats stats;
  EffectiveWeights effective;
};

/// Standardize R_S,i = lambda_R R_i - sum_k lambda_k C_i,k within the group.
ScalarizedRewardResult scalarized_reward_advantage(const ComponentReturns& cr,
                                                   std::span<const double> lambdas,
                                                   double eps = kStdEps);

/// lambda_R Z_R - sum_k lambda_k Z_Ck with every component standardized on
/// its own.
std::vector<double> scalarized_advantage(const ComponentReturns& cr, std::span<const double> lambdas,
                                         double eps = kStdEps);

}  // namespace cgrpo

#endif  // CGRPO_GROUP_ADVANTAGE_HPP_
