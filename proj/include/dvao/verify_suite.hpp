#pragma once

// Randomized certification suites over many reward groups. Each case draws
// from its own generator seeded by (master seed, stream, case index), so a
// single failing case can be replayed in isolation.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dvao/analysis.hpp"
#include "dvao/version.hpp"

namespace dvao {

inline constexpr std::uint64_t kDefaultVerifySeed = 20260417;

enum class CaseStream : std::uint32_t { Magnitude = 0, Sensitivity = 1 };

inline std::mt19937_64 case_rng(std::uint64_t master_seed, CaseStream stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Flat Dirichlet draw: normalized unit exponentials.
template <class Rng>
WeightVector simplex_weights(Rng& rng, std::size_t n) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(n);
  double sum = 0.0;
  for (auto& x : w) {
    x = expo(rng);
    sum += x;
  }
  for (auto& x : w) x /= sum;
  return WeightVector::create(std::move(w));
}

struct CaseShape {
  std::size_t min_group = 2;
  std::size_t max_group = 64;
  std::size_t min_objectives = 2;
  std::size_t max_objectives = 5;
  /// Groups where any objective's deviation is at or below this are redrawn.
  double min_std = kDegenerateStd;
};

struct RandomCase {
  std::uint64_t index = 0;
  RewardGroup group;
  WeightVector weights;
};

/// Rewards uniform on [0, 1]; weights flat on the simplex.
inline RandomCase draw_case(std::uint64_t master_seed, CaseStream stream, std::uint64_t index,
                            const CaseShape& shape) {
  auto rng = case_rng(master_seed, stream, index);
  std::uniform_int_distribution<std::size_t> g_dist(shape.min_group, shape.max_group);
  std::uniform_int_distribution<std::size_t> n_dist(shape.min_objectives, shape.max_objectives);
  std::uniform_real_distribution<double> r_dist(0.0, 1.0);
  const std::size_t g = g_dist(rng);
  const std::size_t n = n_dist(rng);
  auto weights = simplex_weights(rng, n);
  for (;;) {
    Matrix m(g, n);
    for (std::size_t j = 0; j < g; ++j) {
      for (std::size_t k = 0; k < n; ++k) m(j, k) = r_dist(rng);
    }
    auto group = RewardGroup::create("case-" + std::to_string(index), std::move(m));
    const auto st = compute_group_stats(group, weights);
    if (std::all_of(st.stds.begin(), st.stds.end(), [&](double s) { return s > shape.min_std; })) {
      return {index, std::move(group), std::move(weights)};
    }
  }
}

/// Copy of the group with every objective replaced by objective 0.
inline RewardGroup duplicate_first_column(const RewardGroup& group) {
  Matrix m = group.rewards();
  for (std::size_t j = 0; j < m.rows(); ++j) {
    for (std::size_t k = 1; k < m.cols(); ++k) m(j, k) = m(j, 0);
  }
  return RewardGroup::create(group.query_id() + "-dup", std::move(m));
}

struct VerifyConfig {
  std::uint64_t seed = kDefaultVerifySeed;
  std::size_t cases = 10000;
  std::size_t sensitivity_cases = 1000;
  double fd_step = kDefaultFdStep;
  double sensitivity_min_std = 0.05;
  StatsOptions stats;
};

struct Witness {
  std::uint64_t case_index = 0;
  std::size_t group_size = 0;
  std::size_t num_objectives = 0;
  double value = 0.0;
};

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t not_applicable = 0;
  /// Failing-case count per named check.
  std::map<std::string, std::size_t> failures;
  /// Largest observed value of the suite's headline residual.
  Witness worst;
  double seconds = 0.0;

  bool passed() const {
    if (cases == 0) return false;
    for (const auto& [name, count] : failures) {
      if (count != 0) return false;
    }
    return true;
  }
};

struct VerifyReport {
  VerifyConfig config;
  std::vector<SuiteResult> suites;

  bool passed() const {
    return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed(); });
  }
};

namespace detail {

inline void note_worst(SuiteResult& suite, const RandomCase& c, double value) {
  if (value >= suite.worst.value) {
    suite.worst = {c.index, c.group.group_size(), c.group.num_objectives(), value};
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Unit mean-square of A_sum, closed-form mean-square of A_AC, and the
/// inequality between them.
inline SuiteResult run_mean_square_suite(const VerifyConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult suite;
  suite.name = "mean_square";
  suite.failures = {{"unit_mean_square", 0}, {"closed_form", 0}, {"inequality", 0}};
  for (std::uint64_t i = 0; i < cfg.cases; ++i) {
    const auto c = draw_case(cfg.seed, CaseStream::Magnitude, i, {});
    const auto rep = mean_square_check(c.group, c.weights, cfg.stats);
    ++suite.cases;
    if (!rep.applicable) {
      ++suite.not_applicable;
      continue;
    }
    if (rep.unit_residual >= kAssertTol) ++suite.failures["unit_mean_square"];
    if (rep.closed_form_residual >= kAssertTol) ++suite.failures["closed_form"];
    if (rep.lhs < rep.rhs - kAssertTol) ++suite.failures["inequality"];
    detail::note_worst(suite, c, std::max(rep.unit_residual, rep.closed_form_residual));
  }
  suite.seconds = detail::seconds_since(t0);
  return suite;
}

/// Pointwise bound, key identity, and equality under duplicated columns, on
/// the same sample as the first suite.
inline SuiteResult run_shrinkage_suite(const VerifyConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult suite;
  suite.name = "shrinkage";
  suite.failures = {{"pointwise_bound", 0}, {"key_identity", 0}, {"equality_case", 0}};
  for (std::uint64_t i = 0; i < cfg.cases; ++i) {
    const auto c = draw_case(cfg.seed, CaseStream::Magnitude, i, {});
    const auto rep = shrinkage_check(c.group, c.weights, cfg.stats);
    ++suite.cases;
    if (!rep.applicable) {
      ++suite.not_applicable;
      continue;
    }
    if (rep.max_excess > kAssertTol) ++suite.failures["pointwise_bound"];
    if (rep.identity_residual >= kAssertTol) ++suite.failures["key_identity"];
    const auto eq = shrinkage_check(duplicate_first_column(c.group), c.weights, cfg.stats);
    if (!eq.applicable || eq.max_gap >= kAssertTol) ++suite.failures["equality_case"];
    detail::note_worst(suite, c, std::max({rep.max_excess, rep.identity_residual, eq.max_gap}));
  }
  suite.seconds = detail::seconds_since(t0);
  return suite;
}

/// Closed-form AC and DVAO sensitivities against full-pipeline central
/// differences on groups with every deviation above `sensitivity_min_std`.
inline SuiteResult run_sensitivity_suite(const VerifyConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult suite;
  suite.name = "sensitivity";
  suite.failures = {{"ac_sensitivity", 0}, {"dvao_sensitivity", 0}};
  const CaseShape shape{.min_group = 4, .min_std = cfg.sensitivity_min_std};
  for (std::uint64_t i = 0; i < cfg.sensitivity_cases; ++i) {
    const auto c = draw_case(cfg.seed, CaseStream::Sensitivity, i, shape);
    ++suite.cases;
    const auto ac = sensitivity_report(c.group, c.weights, Method::AdvantageCombination, cfg.fd_step);
    const auto dv = sensitivity_report(c.group, c.weights, Method::DVAO, cfg.fd_step);
    if (!(ac.max_rel_error < kSensitivityRelTol)) ++suite.failures["ac_sensitivity"];
    if (!(dv.max_rel_error < kSensitivityRelTol)) ++suite.failures["dvao_sensitivity"];
    detail::note_worst(suite, c, std::max(ac.max_rel_error, dv.max_rel_error));
  }
  suite.seconds = detail::seconds_since(t0);
  return suite;
}

inline VerifyReport run_verification(const VerifyConfig& cfg) {
  if (cfg.cases == 0 || cfg.sensitivity_cases == 0) {
    throw std::invalid_argument("verification needs a positive case count");
  }
  VerifyReport report{cfg, {}};
  report.suites.push_back(run_mean_square_suite(cfg));
  report.suites.push_back(run_shrinkage_suite(cfg));
  report.suites.push_back(run_sensitivity_suite(cfg));
  return report;
}

inline nlohmann::json to_json(const SuiteResult& s) {
  return {{"name", s.name},
          {"cases", s.cases},
          {"not_applicable", s.not_applicable},
          {"failures", s.failures},
          {"passed", s.passed()},
          {"seconds", s.seconds},
          {"worst",
           {{"case_index", s.worst.case_index},
            {"group_size", s.worst.group_size},
            {"num_objectives", s.worst.num_objectives},
            {"value", s.worst.value}}}};
}

inline nlohmann::json to_json(const VerifyReport& r) {
  nlohmann::json suites = nlohmann::json::array();
  for (const auto& s : r.suites) suites.push_back(to_json(s));
  return {{"schema_version", kReportSchemaVersion},
          {"toolkit_version", kVersion},
          {"kind", "verify"},
          {"seed", r.config.seed},
          {"cases", r.config.cases},
          {"sensitivity_cases", r.config.sensitivity_cases},
          {"fault_sample_std", r.config.stats.convention == StdConvention::Sample},
          {"tolerances",
           {{"assert", kAssertTol},
            {"degenerate_std", kDegenerateStd},
            {"sensitivity_rel", kSensitivityRelTol},
            {"relative_floor", kRelErrorFloor},
            {"fd_step", r.config.fd_step},
            {"sensitivity_min_std", r.config.sensitivity_min_std}}},
          {"suites", suites},
          {"passed", r.passed()}};
}

}  // namespace dvao
