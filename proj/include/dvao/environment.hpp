#pragma once

// Synthetic multi-objective reward environments and group sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dvao/policy.hpp"

namespace dvao {

enum class EnvFamily {
  /// r1 = 1 if the target symbol appears, r2 = 1 if |y| <= length_target.
  AccuracyLength,
  /// r1 as above, r2 = clamp(r1 + N(0, noise_scale^2), 0, 1).
  Correlated,
  /// Fixed reward vector regardless of the response.
  Constant,
};

inline std::string_view to_string(EnvFamily f) {
  switch (f) {
    case EnvFamily::AccuracyLength: return "accuracy_length";
    case EnvFamily::Correlated: return "correlated";
    case EnvFamily::Constant: return "constant";
  }
  return "?";
}

inline std::optional<EnvFamily> parse_env_family(std::string_view s) {
  for (auto f : {EnvFamily::AccuracyLength, EnvFamily::Correlated, EnvFamily::Constant}) {
    if (s == to_string(f)) return f;
  }
  return std::nullopt;
}

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// E[clamp(a + s Z, 0, 1)] for standard normal Z.
inline double expected_clamped_normal(double a, double s) {
  if (s <= 0.0) return std::clamp(a, 0.0, 1.0);
  const double lo = -a / s;
  const double hi = (1.0 - a) / s;
  return a * (normal_cdf(hi) - normal_cdf(lo)) + s * (normal_pdf(lo) - normal_pdf(hi)) +
         (1.0 - normal_cdf(hi));
}

}  // namespace detail

struct Environment {
  EnvFamily family = EnvFamily::AccuracyLength;
  std::size_t target_symbol = 1;
  std::size_t length_target = 2;
  double noise_scale = 0.1;
  std::uint64_t noise_seed = 7;
  std::vector<double> constant_rewards{0.5, 0.5};

  std::size_t num_objectives() const {
    return family == EnvFamily::Constant ? constant_rewards.size() : 2;
  }

  void validate(std::size_t vocab_size) const {
    if (family != EnvFamily::Constant &&
        (target_symbol == kStopSymbol || target_symbol >= vocab_size)) {
      throw std::invalid_argument("target_symbol must be in [1, vocab_size)");
    }
    if (noise_scale < 0.0) throw std::invalid_argument("noise_scale must be non-negative");
    if (family == EnvFamily::Constant) {
      if (constant_rewards.empty()) throw std::invalid_argument("constant_rewards is empty");
      for (double r : constant_rewards) {
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("constant reward outside [0, 1]");
      }
    }
  }

  /// Rewards for one response; `noise` is consumed only by the correlated family.
  template <class Rng>
  std::vector<double> evaluate(std::span<const std::size_t> tokens, Rng& noise) const {
    if (family == EnvFamily::Constant) return constant_rewards;
    const double accuracy = hits_target(tokens) ? 1.0 : 0.0;
    if (family == EnvFamily::AccuracyLength) return {accuracy, length_reward(tokens)};
    std::normal_distribution<double> eps(0.0, 1.0);
    return {accuracy, std::clamp(accuracy + noise_scale * eps(noise), 0.0, 1.0)};
  }

  /// Rewards for one response, averaged over the environment's noise.
  std::vector<double> expected(std::span<const std::size_t> tokens) const {
    if (family == EnvFamily::Constant) return constant_rewards;
    const double accuracy = hits_target(tokens) ? 1.0 : 0.0;
    if (family == EnvFamily::AccuracyLength) return {accuracy, length_reward(tokens)};
    return {accuracy, detail::expected_clamped_normal(accuracy, noise_scale)};
  }

 private:
  bool hits_target(std::span<const std::size_t> tokens) const {
    return std::find(tokens.begin(), tokens.end(), target_symbol) != tokens.end();
  }
  double length_reward(std::span<const std::size_t> tokens) const {
    return tokens.size() <= length_target ? 1.0 : 0.0;
  }
};

struct Rollout {
  std::size_t query = 0;
  std::vector<std::size_t> tokens;
  /// log pi_old(token_t) for each position, recorded at sampling time.
  std::vector<double> old_logprobs;
  std::vector<double> rewards;
};

/// G rollouts for one query. Deterministic in `seed`; reward noise draws from
/// a stream keyed by (env.noise_seed, seed).
inline std::vector<Rollout> sample_group(const PolicyTable& policy, std::size_t query,
                                         std::size_t group_size, const Environment& env,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::mt19937_64 noise(derive_seed(env.noise_seed, seed, 0));
  std::vector<std::discrete_distribution<std::size_t>> samplers;
  std::vector<std::vector<double>> log_probs;
  for (std::size_t t = 0; t < policy.max_length(); ++t) {
    const auto p = policy.distribution(query, t);
    samplers.emplace_back(p.begin(), p.end());
    std::vector<double> lp(policy.vocab_size());
    for (std::size_t v = 0; v < lp.size(); ++v) lp[v] = policy.log_prob(query, t, v);
    log_probs.push_back(std::move(lp));
  }

  std::vector<Rollout> out(group_size);
  for (auto& ro : out) {
    ro.query = query;
    for (std::size_t t = 0; t < policy.max_length(); ++t) {
      const std::size_t v = samplers[t](rng);
      ro.tokens.push_back(v);
      ro.old_logprobs.push_back(log_probs[t][v]);
      if (v == kStopSymbol) break;
    }
    ro.rewards = env.evaluate(ro.tokens, noise);
  }
  return out;
}

/// Exact expected reward vector for `query` by enumerating every sequence.
inline std::vector<double> expected_rewards(const PolicyTable& policy, std::size_t query,
                                            const Environment& env) {
  std::vector<double> acc(env.num_objectives(), 0.0);
  enumerate_sequences(policy, query, [&](std::span<const std::size_t> tokens, double p) {
    const auto r = env.expected(tokens);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p * r[k];
  });
  return acc;
}

}  // namespace dvao
