#pragma once

// Scalarization strategies turning a multi-objective rollout group into one
// advantage per rollout.

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dvao/group_stats.hpp"

namespace dvao {

enum class Method { RewardCombination, AdvantageCombination, GDPO, DVAO };

inline constexpr Method kAllMethods[] = {Method::RewardCombination, Method::AdvantageCombination,
                                         Method::GDPO, Method::DVAO};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::RewardCombination: return "rc";
    case Method::AdvantageCombination: return "ac";
    case Method::GDPO: return "gdpo";
    case Method::DVAO: return "dvao";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : kAllMethods) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

struct AdvantageBundle {
  Matrix per_objective;
  std::vector<double> combined;
  Method method = Method::AdvantageCombination;
  /// w~ for DVAO; the static weights for every other method.
  std::vector<double> dynamic_weights;
  GroupStats stats;
  /// Set when the combiner's normalizer vanished and `combined` was zeroed.
  bool degenerate = false;
};

namespace detail {

inline AdvantageBundle start_bundle(const RewardGroup& group, const WeightVector& w,
                                    Method method, StatsOptions opts) {
  AdvantageBundle b;
  b.stats = compute_group_stats(group, w, opts);
  b.per_objective = per_objective_advantages(group, opts);
  b.method = method;
  b.dynamic_weights.assign(w.values().begin(), w.values().end());
  b.combined.assign(group.group_size(), 0.0);
  return b;
}

inline void convex_combine(AdvantageBundle& b, std::span<const double> weights) {
  for (std::size_t j = 0; j < b.per_objective.rows(); ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < b.per_objective.cols(); ++k) acc += weights[k] * b.per_objective(j, k);
    b.combined[j] = acc;
  }
}

}  // namespace detail

/// Normalize the weighted reward sum within the group.
inline AdvantageBundle reward_combination(const RewardGroup& group, const WeightVector& w,
                                          StatsOptions opts = {}) {
  auto b = detail::start_bundle(group, w, Method::RewardCombination, opts);
  const auto r_sum = combined_rewards(group, w);
  b.combined = standardize(r_sum, {b.stats.combined_mean, b.stats.combined_std});
  b.degenerate = is_degenerate(b.stats.combined_std);
  return b;
}

/// Normalize each objective, then take the convex combination of advantages.
inline AdvantageBundle advantage_combination(const RewardGroup& group, const WeightVector& w,
                                             StatsOptions opts = {}) {
  auto b = detail::start_bundle(group, w, Method::AdvantageCombination, opts);
  detail::convex_combine(b, w.values());
  return b;
}

/// Advantage combination with weights rescaled by each objective's group
/// standard deviation: w~_k = w_k sigma_k / sum_l w_l sigma_l.
inline AdvantageBundle dvao(const RewardGroup& group, const WeightVector& w,
                            StatsOptions opts = {}) {
  auto b = detail::start_bundle(group, w, Method::DVAO, opts);
  const double s = b.stats.weighted_std_sum;
  if (is_degenerate(s)) {
    std::fill(b.dynamic_weights.begin(), b.dynamic_weights.end(), 0.0);
    b.degenerate = true;
    return b;
  }
  for (std::size_t k = 0; k < w.size(); ++k) b.dynamic_weights[k] = w[k] * b.stats.stds[k] / s;
  detail::convex_combine(b, b.dynamic_weights);
  return b;
}

/// Per-group combiner dispatch. GDPO yields the advantage-combination bundle;
/// its batch step is gdpo_batch_normalize.
inline AdvantageBundle combine(const RewardGroup& group, const WeightVector& w, Method method,
                               StatsOptions opts = {}) {
  switch (method) {
    case Method::RewardCombination: return reward_combination(group, w, opts);
    case Method::DVAO: return dvao(group, w, opts);
    case Method::AdvantageCombination:
    case Method::GDPO: return advantage_combination(group, w, opts);
  }
  throw std::logic_error("unknown method");
}

/// Pools every combined advantage in the batch and rescales to zero mean and
/// unit population variance. A vanishing pooled deviation leaves values as-is.
inline std::vector<AdvantageBundle> gdpo_batch_normalize(std::vector<AdvantageBundle> bundles,
                                                         StatsOptions opts = {}) {
  if (bundles.empty()) throw std::invalid_argument("gdpo_batch_normalize: empty batch");
  std::vector<double> pooled;
  for (const auto& b : bundles) {
    if (b.method != Method::AdvantageCombination) {
      throw std::invalid_argument("gdpo_batch_normalize expects advantage-combination bundles, got " +
                                  std::string(to_string(b.method)));
    }
    pooled.insert(pooled.end(), b.combined.begin(), b.combined.end());
  }
  const Moments m = moments(pooled, opts);
  const bool flat = is_degenerate(m.std);
  for (auto& b : bundles) {
    b.method = Method::GDPO;
    if (flat) {
      b.degenerate = true;
      continue;
    }
    for (double& a : b.combined) a = (a - m.mean) / m.std;
  }
  return bundles;
}

}  // namespace dvao
