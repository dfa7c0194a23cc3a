#pragma once

// Desk-scale group-relative policy optimization: sample a group per query,
// turn the group's rewards into advantages with a chosen combiner, and take a
// plain gradient-ascent step on the clipped surrogate.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvao/combiners.hpp"
#include "dvao/environment.hpp"
#include "dvao/policy.hpp"
#include "dvao/surrogate.hpp"

namespace dvao {

struct TrainConfig {
  Method combiner = Method::DVAO;
  std::vector<double> weights{0.5, 0.5};
  std::size_t group_size = 16;
  double clip_epsilon = 0.2;
  double learning_rate = 0.5;
  std::size_t steps = 100;
  /// Query ids sampled every step; the policy holds max(id) + 1 query rows.
  std::vector<std::size_t> queries{0};
  std::uint64_t seed = 1;
  /// Gradient steps per batch of rollouts; pi_old stays the pre-batch policy.
  std::size_t epochs = 1;
  std::size_t vocab_size = 5;
  std::size_t max_length = 4;
  /// Initial logit of every non-stop symbol; stop starts at zero.
  double init_token_logit = 0.0;
  /// Record real elapsed milliseconds. Off keeps output byte-reproducible.
  bool wall_clock = false;

  void validate() const {
    if (!(clip_epsilon > 0.0)) throw std::invalid_argument("clip_epsilon must be positive");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be non-negative");
    if (group_size < 2) throw std::invalid_argument("group_size must be at least 2");
    if (queries.empty()) throw std::invalid_argument("queries must not be empty");
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    WeightVector::create(weights);
  }

  std::size_t num_query_rows() const {
    return *std::max_element(queries.begin(), queries.end()) + 1;
  }
};

struct RunRecord {
  std::size_t step = 0;
  /// Per-objective reward mean and population deviation, averaged over groups.
  std::vector<double> reward_mean;
  std::vector<double> reward_std;
  /// Exact expected rewards of the pre-update policy, averaged over queries.
  std::vector<double> expected_reward;
  /// Mean |advantage| of the configured combiner.
  double mean_abs_advantage = 0.0;
  /// Mean |A_sum| and |A_dvao| evaluated on the same groups.
  double paired_abs_rc = 0.0;
  double paired_abs_dvao = 0.0;
  double mean_length = 0.0;
  /// Surrogate after the update, on this step's rollouts.
  double surrogate = 0.0;
  double millis = 0.0;
};

struct TrainResult {
  std::vector<RunRecord> records;
  PolicyTable policy;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, std::vector<RunRecord> records)
      : std::runtime_error("non-finite policy parameters after step " + std::to_string(step)),
        step_(step), records_(std::move(records)) {}

  std::size_t step() const noexcept { return step_; }
  /// Records up to and including the diverged step.
  const std::vector<RunRecord>& records() const noexcept { return records_; }

 private:
  std::size_t step_;
  std::vector<RunRecord> records_;
};

inline PolicyTable initial_policy(const TrainConfig& cfg) {
  PolicyTable policy(cfg.num_query_rows(), cfg.max_length, cfg.vocab_size, cfg.init_token_logit);
  for (std::size_t q = 0; q < policy.num_queries(); ++q) {
    for (std::size_t t = 0; t < policy.max_length(); ++t) policy.logit(q, t, kStopSymbol) = 0.0;
  }
  return policy;
}

namespace detail {

struct QueryBatch {
  std::vector<Rollout> rollouts;
  AdvantageBundle bundle;
  std::vector<double> paired_rc;
  std::vector<double> paired_dvao;
};

inline double mean_abs(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += std::abs(x);
  return acc / static_cast<double>(xs.size());
}

/// Mean surrogate and gradient over the batch's query groups.
inline SurrogateResult batch_surrogate(const PolicyTable& policy, const std::vector<QueryBatch>& batch,
                                       double epsilon) {
  SurrogateResult total;
  total.gradient.assign(policy.num_parameters(), 0.0);
  const double inv_q = 1.0 / static_cast<double>(batch.size());
  for (const auto& qb : batch) {
    const auto r = clipped_surrogate(policy, qb.rollouts, qb.bundle.combined, epsilon);
    total.objective += inv_q * r.objective;
    for (std::size_t i = 0; i < r.gradient.size(); ++i) total.gradient[i] += inv_q * r.gradient[i];
    total.tokens += r.tokens;
    total.clipped_tokens += r.clipped_tokens;
  }
  return total;
}

}  // namespace detail

/// Exact expected rewards averaged over `queries`.
inline std::vector<double> expected_rewards(const PolicyTable& policy,
                                            std::span<const std::size_t> queries,
                                            const Environment& env) {
  std::vector<double> acc(env.num_objectives(), 0.0);
  for (std::size_t q : queries) {
    const auto r = expected_rewards(policy, q, env);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += r[k] / static_cast<double>(queries.size());
  }
  return acc;
}

/// Runs cfg.steps updates from initial_policy(cfg). Deterministic given
/// cfg.seed and env.noise_seed.
inline TrainResult train(const TrainConfig& cfg, const Environment& env) {
  cfg.validate();
  env.validate(cfg.vocab_size);
  if (cfg.weights.size() != env.num_objectives()) {
    throw DimensionError("weights", std::to_string(cfg.weights.size()) + " weights for " +
                                        std::to_string(env.num_objectives()) + " objectives");
  }
  const auto w = WeightVector::create(cfg.weights);
  TrainResult result{{}, initial_policy(cfg)};
  PolicyTable& policy = result.policy;
  const std::size_t n = w.size();

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.step = step;
    rec.reward_mean.assign(n, 0.0);
    rec.reward_std.assign(n, 0.0);
    rec.expected_reward = expected_rewards(policy, cfg.queries, env);

    std::vector<detail::QueryBatch> batch;
    std::size_t token_count = 0;
    for (std::size_t q : cfg.queries) {
      detail::QueryBatch qb;
      qb.rollouts = sample_group(policy, q, cfg.group_size, env, derive_seed(cfg.seed, step, q));
      Matrix m(cfg.group_size, n);
      for (std::size_t j = 0; j < cfg.group_size; ++j) {
        for (std::size_t k = 0; k < n; ++k) m(j, k) = qb.rollouts[j].rewards[k];
        token_count += qb.rollouts[j].tokens.size();
      }
      const auto group = RewardGroup::create("q" + std::to_string(q), std::move(m));
      qb.bundle = combine(group, w, cfg.combiner);
      qb.paired_rc = reward_combination(group, w).combined;
      qb.paired_dvao = dvao(group, w).combined;
      for (std::size_t k = 0; k < n; ++k) {
        rec.reward_mean[k] += qb.bundle.stats.means[k];
        rec.reward_std[k] += qb.bundle.stats.stds[k];
      }
      batch.push_back(std::move(qb));
    }

    if (cfg.combiner == Method::GDPO) {
      std::vector<AdvantageBundle> bundles;
      for (auto& qb : batch) bundles.push_back(std::move(qb.bundle));
      bundles = gdpo_batch_normalize(std::move(bundles));
      for (std::size_t i = 0; i < batch.size(); ++i) batch[i].bundle = std::move(bundles[i]);
    }

    const auto num_q = static_cast<double>(batch.size());
    const auto num_rollouts = num_q * static_cast<double>(cfg.group_size);
    for (std::size_t k = 0; k < n; ++k) {
      rec.reward_mean[k] /= num_q;
      rec.reward_std[k] /= num_q;
    }
    for (const auto& qb : batch) {
      rec.mean_abs_advantage += detail::mean_abs(qb.bundle.combined) / num_q;
      rec.paired_abs_rc += detail::mean_abs(qb.paired_rc) / num_q;
      rec.paired_abs_dvao += detail::mean_abs(qb.paired_dvao) / num_q;
    }
    rec.mean_length = static_cast<double>(token_count) / num_rollouts;

    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      const auto grad = detail::batch_surrogate(policy, batch, cfg.clip_epsilon).gradient;
      auto theta = policy.logits();
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += cfg.learning_rate * grad[i];
    }
    rec.surrogate = detail::batch_surrogate(policy, batch, cfg.clip_epsilon).objective;
    if (cfg.wall_clock) {
      rec.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    result.records.push_back(std::move(rec));
    if (!policy.all_finite()) throw TrainingDiverged(step, std::move(result.records));
  }
  return result;
}

struct SweepRow {
  Method combiner = Method::DVAO;
  double w1 = 0.0;
  double exp_reward_1 = 0.0;
  double exp_reward_2 = 0.0;
  std::uint64_t seed = 0;
};

/// Trains once per (w1, combiner) with weights {w1, 1 - w1}; rows ordered by
/// w1, then by the order of `combiners`.
inline std::vector<SweepRow> pareto_sweep(const TrainConfig& base, const Environment& env,
                                          std::span<const double> w1_grid,
                                          std::span<const Method> combiners) {
  if (env.num_objectives() != 2) throw DimensionError("num_objectives", "sweep needs 2 objectives");
  for (double w1 : w1_grid) {
    if (!(w1 > 0.0 && w1 < 1.0)) throw std::invalid_argument("sweep weight must lie in (0, 1)");
  }
  std::vector<double> grid(w1_grid.begin(), w1_grid.end());
  std::stable_sort(grid.begin(), grid.end());
  std::vector<SweepRow> rows;
  for (double w1 : grid) {
    for (Method m : combiners) {
      TrainConfig cfg = base;
      cfg.combiner = m;
      cfg.weights = {w1, 1.0 - w1};
      const auto run = train(cfg, env);
      const auto r = expected_rewards(run.policy, cfg.queries, env);
      rows.push_back({m, w1, r[0], r[1], cfg.seed});
    }
  }
  return rows;
}

/// Marks rows not dominated by any other row in both expected rewards.
inline std::vector<bool> pareto_nondominated(std::span<const SweepRow> rows) {
  std::vector<bool> keep(rows.size(), true);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < rows.size() && keep[a]; ++b) {
      const bool weakly = rows[b].exp_reward_1 >= rows[a].exp_reward_1 &&
                          rows[b].exp_reward_2 >= rows[a].exp_reward_2;
      const bool strictly = rows[b].exp_reward_1 > rows[a].exp_reward_1 ||
                            rows[b].exp_reward_2 > rows[a].exp_reward_2;
      if (weakly && strictly) keep[a] = false;
    }
  }
  return keep;
}

}  // namespace dvao
