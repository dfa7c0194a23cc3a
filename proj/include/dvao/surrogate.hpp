#pragma once

// Clipped importance-weighted surrogate for one rollout group and its exact
// gradient with respect to the policy logits. No KL penalty.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvao/environment.hpp"
#include "dvao/group_stats.hpp"
#include "dvao/policy.hpp"

namespace dvao {

struct SurrogateResult {
  /// (1/G) sum_j (1/|y_j|) sum_t min(s A_j, clip(s, 1-eps, 1+eps) A_j)
  double objective = 0.0;
  /// d objective / d logits, laid out like PolicyTable::logits().
  std::vector<double> gradient;
  std::size_t tokens = 0;
  std::size_t clipped_tokens = 0;
};

namespace detail {

inline void check_surrogate_inputs(std::span<const Rollout> rollouts,
                                   std::span<const double> advantages, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("clip epsilon must be positive");
  if (rollouts.empty()) throw DimensionError("group_size", "no rollouts");
  if (advantages.size() != rollouts.size()) {
    throw DimensionError("advantages", std::to_string(advantages.size()) + " advantages for " +
                                           std::to_string(rollouts.size()) + " rollouts");
  }
  for (const auto& ro : rollouts) {
    if (ro.tokens.empty() || ro.old_logprobs.size() != ro.tokens.size()) {
      throw DimensionError("old_logprobs", "length must equal the (non-empty) token count");
    }
  }
}

}  // namespace detail

/// Where the min picks the unclipped term the per-token gradient is
/// A s (onehot(y_t) - pi(.|t)); where the clipped term wins it is zero.
/// Ties inside the clip band take the unclipped branch.
inline SurrogateResult clipped_surrogate(const PolicyTable& policy, std::span<const Rollout> rollouts,
                                         std::span<const double> advantages, double epsilon) {
  detail::check_surrogate_inputs(rollouts, advantages, epsilon);
  SurrogateResult out;
  out.gradient.assign(policy.num_parameters(), 0.0);
  const double inv_g = 1.0 / static_cast<double>(rollouts.size());
  auto grad = out.gradient.begin();

  for (std::size_t j = 0; j < rollouts.size(); ++j) {
    const Rollout& ro = rollouts[j];
    const double a = advantages[j];
    const double scale = inv_g / static_cast<double>(ro.tokens.size());
    for (std::size_t t = 0; t < ro.tokens.size(); ++t) {
      const std::size_t y = ro.tokens[t];
      const double ratio = std::exp(policy.log_prob(ro.query, t, y) - ro.old_logprobs[t]);
      const double unclipped = ratio * a;
      const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * a;
      ++out.tokens;
      if (clipped < unclipped) {
        out.objective += scale * clipped;
        ++out.clipped_tokens;
        continue;
      }
      out.objective += scale * unclipped;
      const double coeff = scale * unclipped;
      if (coeff == 0.0) continue;
      const auto p = policy.distribution(ro.query, t);
      const std::size_t base = policy.index(ro.query, t, 0);
      for (std::size_t v = 0; v < p.size(); ++v) {
        grad[base + v] += coeff * ((v == y ? 1.0 : 0.0) - p[v]);
      }
    }
  }
  return out;
}

/// Smallest distance of any token's ratio to either clip edge.
inline double min_clip_distance(const PolicyTable& policy, std::span<const Rollout> rollouts,
                                double epsilon) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ro : rollouts) {
    for (std::size_t t = 0; t < ro.tokens.size(); ++t) {
      const double ratio = std::exp(policy.log_prob(ro.query, t, ro.tokens[t]) - ro.old_logprobs[t]);
      best = std::min({best, std::abs(ratio - (1.0 - epsilon)), std::abs(ratio - (1.0 + epsilon))});
    }
  }
  return best;
}

}  // namespace dvao
