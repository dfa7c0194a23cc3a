#pragma once

// Population statistics over a rollout group and per-objective normalization.
//
// A rollout group holds G sampled responses for one query, each scored by n
// reward functions. Every statistic here divides by G: the unit mean-square
// property of normalized advantages only holds for population moments.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dvao/tolerances.hpp"

namespace dvao {

/// Raised when an input's shape disagrees with what an operation expects.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(std::string axis, const std::string& what)
      : std::invalid_argument(axis + ": " + what), axis_(std::move(axis)) {}

  /// Name of the offending axis ("group_size", "num_objectives", "weights", ...).
  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  void set_column(std::size_t c, std::span<const double> values) {
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
  }

  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Divisor used for the standard deviation. Only `Population` is correct;
/// `Sample` exists so the verifiers can be shown to detect the wrong choice.
enum class StdConvention { Population, Sample };

struct StatsOptions {
  StdConvention convention = StdConvention::Population;
};

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

/// Two-pass mean and standard deviation.
inline Moments moments(std::span<const double> xs, StatsOptions opts = {}) {
  const auto count = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / count;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double divisor = opts.convention == StdConvention::Population ? count : count - 1.0;
  return {mean, std::sqrt(ss / divisor)};
}

inline bool is_degenerate(double std_dev) noexcept { return std_dev < kDegenerateStd; }

/// (x - mean) / std elementwise; all zeros when std is degenerate.
inline std::vector<double> standardize(std::span<const double> xs, Moments m) {
  std::vector<double> out(xs.size(), 0.0);
  if (is_degenerate(m.std)) return out;
  for (std::size_t j = 0; j < xs.size(); ++j) out[j] = (xs[j] - m.mean) / m.std;
  return out;
}

/// G x n rewards for one query; entry (j, k) is objective k's reward for rollout j.
class RewardGroup {
 public:
  /// Validates shape (G >= 2, n >= 1) and that every reward lies in [0, 1].
  static RewardGroup create(std::string query_id, Matrix rewards) {
    check_shape(rewards);
    for (std::size_t j = 0; j < rewards.rows(); ++j) {
      for (std::size_t k = 0; k < rewards.cols(); ++k) {
        const double r = rewards(j, k);
        if (!(r >= 0.0 && r <= 1.0)) {
          throw std::invalid_argument("reward (" + std::to_string(j) + ", " + std::to_string(k) +
                                      ") = " + std::to_string(r) + " outside [0, 1]");
        }
      }
    }
    return RewardGroup(std::move(query_id), std::move(rewards));
  }

  static RewardGroup from_rows(std::string query_id,
                               const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw DimensionError("group_size", "no rollouts");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].size() != m.cols()) {
        throw DimensionError("num_objectives", "row " + std::to_string(j) + " has " +
                                                   std::to_string(rows[j].size()) +
                                                   " rewards, expected " +
                                                   std::to_string(m.cols()));
      }
      for (std::size_t k = 0; k < m.cols(); ++k) m(j, k) = rows[j][k];
    }
    return create(std::move(query_id), std::move(m));
  }

  /// Column-major convenience: one vector per objective.
  static RewardGroup from_columns(std::string query_id,
                                  const std::vector<std::vector<double>>& columns) {
    if (columns.empty()) throw DimensionError("num_objectives", "no objectives");
    Matrix m(columns.front().size(), columns.size());
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (columns[k].size() != m.rows()) {
        throw DimensionError("group_size", "objective " + std::to_string(k) + " has " +
                                               std::to_string(columns[k].size()) +
                                               " rollouts, expected " + std::to_string(m.rows()));
      }
      m.set_column(k, columns[k]);
    }
    return create(std::move(query_id), std::move(m));
  }

  /// Skips the [0, 1] range check. The combiner math is total on the reals;
  /// finite-difference oracles perturb rewards past the boundary.
  static RewardGroup unchecked(std::string query_id, Matrix rewards) {
    check_shape(rewards);
    return RewardGroup(std::move(query_id), std::move(rewards));
  }

  const std::string& query_id() const noexcept { return query_id_; }
  const Matrix& rewards() const noexcept { return rewards_; }
  std::size_t group_size() const noexcept { return rewards_.rows(); }
  std::size_t num_objectives() const noexcept { return rewards_.cols(); }
  double at(std::size_t j, std::size_t k) const { return rewards_(j, k); }
  std::vector<double> column(std::size_t k) const { return rewards_.column(k); }

  /// Copy with one entry replaced; the result is unchecked.
  RewardGroup with_entry(std::size_t j, std::size_t k, double value) const {
    Matrix m = rewards_;
    m(j, k) = value;
    return RewardGroup(query_id_, std::move(m));
  }

 private:
  RewardGroup(std::string query_id, Matrix rewards)
      : query_id_(std::move(query_id)), rewards_(std::move(rewards)) {}

  static void check_shape(const Matrix& m) {
    if (m.rows() < 2) {
      throw DimensionError("group_size", "need at least 2 rollouts, got " + std::to_string(m.rows()));
    }
    if (m.cols() < 1) throw DimensionError("num_objectives", "need at least 1 objective");
  }

  std::string query_id_;
  Matrix rewards_;
};

/// Convex combination weights over n objectives.
class WeightVector {
 public:
  static WeightVector create(std::vector<double> weights) {
    if (weights.empty()) throw DimensionError("weights", "empty weight vector");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0 && w <= 1.0)) {
        throw std::invalid_argument("weight " + std::to_string(w) + " outside [0, 1]");
      }
      sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightSumTol) {
      throw std::invalid_argument("weights sum to " + std::to_string(sum) + ", expected 1");
    }
    return WeightVector(std::move(weights));
  }

  static WeightVector uniform(std::size_t n) {
    return WeightVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  /// {w1, 1 - w1}.
  static WeightVector pair(double w1) { return create({w1, 1.0 - w1}); }

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t k) const { return weights_[k]; }
  std::span<const double> values() const noexcept { return weights_; }

 private:
  explicit WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {}
  std::vector<double> weights_;
};

struct GroupStats {
  std::vector<double> means;
  std::vector<double> stds;
  double combined_mean = 0.0;
  double combined_std = 0.0;
  /// S = sum_k w_k * stds[k]; never smaller than combined_std.
  double weighted_std_sum = 0.0;
};

inline void check_weights(const RewardGroup& group, const WeightVector& w) {
  if (w.size() != group.num_objectives()) {
    throw DimensionError("weights", "got " + std::to_string(w.size()) + " weights for " +
                                        std::to_string(group.num_objectives()) + " objectives");
  }
}

/// r_sum[j] = sum_k w_k r[j][k], accumulated in objective order.
inline std::vector<double> combined_rewards(const RewardGroup& group, const WeightVector& w) {
  check_weights(group, w);
  std::vector<double> out(group.group_size(), 0.0);
  for (std::size_t j = 0; j < group.group_size(); ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < group.num_objectives(); ++k) acc += w[k] * group.at(j, k);
    out[j] = acc;
  }
  return out;
}

inline GroupStats compute_group_stats(const RewardGroup& group, const WeightVector& w,
                                      StatsOptions opts = {}) {
  check_weights(group, w);
  const std::size_t n = group.num_objectives();
  GroupStats stats;
  stats.means.resize(n);
  stats.stds.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto col = group.column(k);
    const Moments m = moments(col, opts);
    stats.means[k] = m.mean;
    stats.stds[k] = m.std;
    stats.weighted_std_sum += w[k] * m.std;
  }
  const auto r_sum = combined_rewards(group, w);
  const Moments c = moments(r_sum, opts);
  stats.combined_mean = c.mean;
  stats.combined_std = c.std;
  return stats;
}

/// Group-normalized advantages for objective k. Zero vector when the
/// objective is constant across the group.
inline std::vector<double> normalize_objective(const RewardGroup& group, std::size_t k,
                                               StatsOptions opts = {}) {
  if (k >= group.num_objectives()) {
    throw std::out_of_range("objective index " + std::to_string(k) + " >= " +
                            std::to_string(group.num_objectives()));
  }
  const auto col = group.column(k);
  return standardize(col, moments(col, opts));
}

/// G x n matrix whose column k is normalize_objective(group, k).
inline Matrix per_objective_advantages(const RewardGroup& group, StatsOptions opts = {}) {
  Matrix out(group.group_size(), group.num_objectives());
  for (std::size_t k = 0; k < group.num_objectives(); ++k) {
    out.set_column(k, normalize_objective(group, k, opts));
  }
  return out;
}

/// rho[k][l] = (1/G) sum_j A_k[j] A_l[j]. Zero whenever either objective is
/// degenerate (its advantages are identically zero).
inline Matrix correlation_matrix(const RewardGroup& group, StatsOptions opts = {}) {
  const Matrix adv = per_objective_advantages(group, opts);
  const std::size_t n = group.num_objectives();
  const auto g = static_cast<double>(group.group_size());
  Matrix rho(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k; l < n; ++l) {
      double acc = 0.0;
      for (std::size_t j = 0; j < adv.rows(); ++j) acc += adv(j, k) * adv(j, l);
      rho(k, l) = acc / g;
      rho(l, k) = rho(k, l);
    }
  }
  return rho;
}

}  // namespace dvao
