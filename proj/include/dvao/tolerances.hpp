#pragma once

namespace dvao {

/// Absolute tolerance used for every identity and inequality assertion.
inline constexpr double kAssertTol = 1e-9;

/// A standard deviation below this is treated as exactly zero.
inline constexpr double kDegenerateStd = 1e-12;

/// Allowed deviation of a weight vector's sum from one.
inline constexpr double kWeightSumTol = 1e-12;

/// Floor on the denominator of relative-error metrics.
inline constexpr double kRelErrorFloor = 1e-8;

/// Sensitivity agreement threshold between closed form and finite differences.
inline constexpr double kSensitivityRelTol = 1e-5;

/// Default central-difference step for reward perturbations.
inline constexpr double kDefaultFdStep = 1e-6;

/// Steps below this are rejected by the finite-difference oracle.
inline constexpr double kMinFdStep = 1e-12;

}  // namespace dvao
