#pragma once

#include <cstdint>

namespace rsicert {

/// Standard normal quantile z_p, p in (0,1).
double normal_quantile(double p);
double normal_cdf(double z);

/// Upper one-sided critical value z_{1-alpha}.
inline double z_upper(double alpha) { return normal_quantile(1.0 - alpha); }

/// Seed derivation for per-replicate Monte-Carlo streams (splitmix64 step);
/// keeps replicate r reproducible regardless of execution order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

}  // namespace rsicert
