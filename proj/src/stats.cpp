#include "rsicert/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include "rsicert/error.hpp"

namespace rsicert {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::InvalidParams, "normal quantile probability must lie in (0,1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_cdf(double z) { return boost::math::cdf(boost::math::normal_distribution<double>(), z); }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace rsicert
