#pragma once

// Numerical certification of the advantage-magnitude and sensitivity results:
//  - reward combination has unit mean-square advantage, advantage combination
//    has mean-square 1 - 2 sum_{k<l} w_k w_l (1 - rho_kl) <= 1;
//  - |A_dvao| <= |A_sum| pointwise, via sigma_sum A_sum = sum_k w_k sigma_k A_k
//    and sigma_sum <= sum_k w_k sigma_k;
//  - closed-form d(combined)/d(r_k[j]) for AC and DVAO, checked against
//    central differences through the full combiner pipeline.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dvao/combiners.hpp"
#include "dvao/group_stats.hpp"
#include "dvao/tolerances.hpp"

namespace dvao {

/// (1/G) sum_j combined[j]^2.
inline double mean_square_advantage(const AdvantageBundle& bundle) {
  double acc = 0.0;
  for (double a : bundle.combined) acc += a * a;
  return acc / static_cast<double>(bundle.combined.size());
}

/// 1 - 2 sum_{k<l} w_k w_l (1 - rho_kl).
inline double advantage_combination_mean_square(const Matrix& rho, const WeightVector& w) {
  double cross = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (std::size_t l = k + 1; l < w.size(); ++l) cross += w[k] * w[l] * (1.0 - rho(k, l));
  }
  return 1.0 - 2.0 * cross;
}

struct MeanSquareReport {
  bool applicable = false;
  double lhs = 0.0;              ///< mean-square of A_sum
  double rhs = 0.0;              ///< mean-square of A_AC
  double closed_form_rhs = 0.0;  ///< 1 - 2 sum w_k w_l (1 - rho_kl)
  double unit_residual = 0.0;    ///< |lhs - 1|
  double closed_form_residual = 0.0;
  bool holds = false;
};

/// Not applicable unless every objective and the weighted sum vary within the
/// group; with a flat weighted sum A_sum is identically zero.
inline MeanSquareReport mean_square_check(const RewardGroup& group, const WeightVector& w,
                                             StatsOptions opts = {}) {
  MeanSquareReport rep;
  const auto rc = reward_combination(group, w, opts);
  const auto& st = rc.stats;
  if (is_degenerate(st.combined_std) ||
      std::any_of(st.stds.begin(), st.stds.end(), [](double s) { return is_degenerate(s); })) {
    return rep;
  }
  rep.applicable = true;
  const auto ac = advantage_combination(group, w, opts);
  rep.lhs = mean_square_advantage(rc);
  rep.rhs = mean_square_advantage(ac);
  rep.closed_form_rhs = advantage_combination_mean_square(correlation_matrix(group, opts), w);
  rep.unit_residual = std::abs(rep.lhs - 1.0);
  rep.closed_form_residual = std::abs(rep.rhs - rep.closed_form_rhs);
  rep.holds = rep.lhs >= rep.rhs - kAssertTol && rep.closed_form_residual < kAssertTol;
  return rep;
}

struct ShrinkageReport {
  bool applicable = false;
  std::vector<double> dvao_magnitude;
  std::vector<double> sum_magnitude;
  /// max_j |sigma_sum A_sum[j] - sum_k w_k sigma_k A_k[j]|
  double identity_residual = 0.0;
  /// max_j (|A_dvao[j]| - |A_sum[j]|); non-positive when the bound holds.
  double max_excess = 0.0;
  /// max_j ||A_sum[j]| - |A_dvao[j]||; zero for perfectly correlated rewards.
  double max_gap = 0.0;
  bool holds = false;
};

inline ShrinkageReport shrinkage_check(const RewardGroup& group, const WeightVector& w,
                                             StatsOptions opts = {}) {
  ShrinkageReport rep;
  const auto rc = reward_combination(group, w, opts);
  const auto& st = rc.stats;
  if (is_degenerate(st.combined_std) || is_degenerate(st.weighted_std_sum)) return rep;
  rep.applicable = true;
  const auto dv = dvao(group, w, opts);
  const std::size_t g = group.group_size();
  rep.dvao_magnitude.resize(g);
  rep.sum_magnitude.resize(g);
  rep.max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < g; ++j) {
    double weighted = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) weighted += w[k] * st.stds[k] * rc.per_objective(j, k);
    rep.identity_residual =
        std::max(rep.identity_residual, std::abs(st.combined_std * rc.combined[j] - weighted));
    rep.dvao_magnitude[j] = std::abs(dv.combined[j]);
    rep.sum_magnitude[j] = std::abs(rc.combined[j]);
    rep.max_excess = std::max(rep.max_excess, rep.dvao_magnitude[j] - rep.sum_magnitude[j]);
    rep.max_gap = std::max(rep.max_gap, std::abs(rep.sum_magnitude[j] - rep.dvao_magnitude[j]));
  }
  rep.holds = rep.max_excess <= kAssertTol && rep.identity_residual < kAssertTol;
  return rep;
}

struct SensitivityReport {
  Method method = Method::AdvantageCombination;
  Matrix analytic;
  Matrix numeric;
  /// 1.0 where the closed form is undefined (zero deviation), else 0.0.
  Matrix undefined;
  double max_rel_error = 0.0;
  std::size_t worst_row = 0;
  std::size_t worst_col = 0;
};

namespace detail {

inline void require_sensitivity_method(Method method) {
  if (method != Method::AdvantageCombination && method != Method::DVAO) {
    throw std::invalid_argument("sensitivity is defined for ac and dvao only, got " +
                                std::string(to_string(method)));
  }
}

}  // namespace detail

/// Closed-form diagonal sensitivities d combined[j] / d r_k[j]:
///   AC:   (w_k / sigma_k)  (1 - 1/G - A_k[j]^2 / G)
///   DVAO: (w~_k / sigma_k) (1 - 1/G - A_dvao[j] A_k[j] / G)
/// Entries for a constant objective are NaN and flagged in `undefined`.
inline SensitivityReport sensitivity_analytic(const RewardGroup& group, const WeightVector& w,
                                              Method method) {
  detail::require_sensitivity_method(method);
  const auto bundle = combine(group, w, method);
  const std::size_t g = group.group_size();
  const std::size_t n = group.num_objectives();
  const double inv_g = 1.0 / static_cast<double>(g);

  SensitivityReport rep;
  rep.method = method;
  rep.analytic = Matrix(g, n);
  rep.undefined = Matrix(g, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double sigma = bundle.stats.stds[k];
    const bool bad = is_degenerate(sigma) || (method == Method::DVAO && bundle.degenerate);
    for (std::size_t j = 0; j < g; ++j) {
      if (bad) {
        rep.analytic(j, k) = std::numeric_limits<double>::quiet_NaN();
        rep.undefined(j, k) = 1.0;
        continue;
      }
      const double a_k = bundle.per_objective(j, k);
      const double cross = method == Method::DVAO ? bundle.combined[j] * a_k : a_k * a_k;
      rep.analytic(j, k) = (bundle.dynamic_weights[k] / sigma) * (1.0 - inv_g - inv_g * cross);
    }
  }
  return rep;
}

/// Central difference of combined[row] with respect to r_k[perturbed_row],
/// re-running the whole combiner on each perturbed group. The divisor is the
/// representable step (r + h) - (r - h), not 2h. Off-diagonal rows
/// (row != perturbed_row) have no closed form here; this is the only route.
inline double numeric_partial(const RewardGroup& group, const WeightVector& w, Method method,
                              std::size_t row, std::size_t perturbed_row, std::size_t k,
                              double h = kDefaultFdStep) {
  if (!(h >= kMinFdStep)) {
    throw std::invalid_argument("finite-difference step " + std::to_string(h) + " below " +
                                std::to_string(kMinFdStep));
  }
  const double r = group.at(perturbed_row, k);
  const double up = r + h;
  const double down = r - h;
  const double c_up = combine(group.with_entry(perturbed_row, k, up), w, method).combined[row];
  const double c_down = combine(group.with_entry(perturbed_row, k, down), w, method).combined[row];
  return (c_up - c_down) / (up - down);
}

/// Diagonal central differences d combined[j] / d r_k[j] for every (j, k).
inline Matrix sensitivity_numeric(const RewardGroup& group, const WeightVector& w, Method method,
                                  double h = kDefaultFdStep) {
  detail::require_sensitivity_method(method);
  Matrix out(group.group_size(), group.num_objectives());
  for (std::size_t j = 0; j < out.rows(); ++j) {
    for (std::size_t k = 0; k < out.cols(); ++k) out(j, k) = numeric_partial(group, w, method, j, j, k, h);
  }
  return out;
}

/// |a - b| / max(|a|, floor).
inline double relative_error(double analytic, double numeric, double floor = kRelErrorFloor) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic), floor);
}

/// Both halves plus the worst relative discrepancy over defined entries.
inline SensitivityReport sensitivity_report(const RewardGroup& group, const WeightVector& w,
                                            Method method, double h = kDefaultFdStep) {
  auto rep = sensitivity_analytic(group, w, method);
  rep.numeric = sensitivity_numeric(group, w, method, h);
  rep.max_rel_error = 0.0;
  for (std::size_t j = 0; j < rep.analytic.rows(); ++j) {
    for (std::size_t k = 0; k < rep.analytic.cols(); ++k) {
      if (rep.undefined(j, k) != 0.0) continue;
      const double e = relative_error(rep.analytic(j, k), rep.numeric(j, k));
      if (e > rep.max_rel_error) {
        rep.max_rel_error = e;
        rep.worst_row = j;
        rep.worst_col = k;
      }
    }
  }
  return rep;
}

}  // namespace dvao
