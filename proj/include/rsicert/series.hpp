#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rsicert {

struct Sample {
  double t = 0.0;
  double value = 0.0;
  std::optional<double> quality;
};

/// Timestamped, unit-tagged scalar samples. Immutable once constructed: the
/// constructor enforces non-empty, strictly increasing, finite times and
/// values, and quality weights in [0,1].
class TimeSeries {
 public:
  TimeSeries(std::string name, std::string unit, Eigen::VectorXd times, Eigen::VectorXd values,
             std::optional<Eigen::VectorXd> quality = std::nullopt, std::string snapshot_version = {});

  static TimeSeries from_samples(std::string name, std::string unit, std::span<const Sample> samples,
                                 std::string snapshot_version = {});

  const std::string& name() const noexcept { return name_; }
  const std::string& unit() const noexcept { return unit_; }
  const std::string& snapshot_version() const noexcept { return snapshot_version_; }
  Eigen::Index size() const noexcept { return times_.size(); }
  const Eigen::VectorXd& times() const noexcept { return times_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  bool has_quality() const noexcept { return quality_.has_value(); }
  /// Quality weights; all ones when the source carried no quality column.
  Eigen::VectorXd weights() const;
  Sample sample(Eigen::Index i) const;
  double front_time() const { return times_[0]; }
  double back_time() const { return times_[times_.size() - 1]; }

  /// Same grid and quality, new values (and optionally a new name/unit).
  TimeSeries with_values(Eigen::VectorXd values, std::string name, std::string unit) const;
  TimeSeries with_version(std::string snapshot_version) const;

  bool same_grid(const TimeSeries& other) const;
  friend bool operator==(const TimeSeries& a, const TimeSeries& b);

 private:
  std::string name_;
  std::string unit_;
  std::string snapshot_version_;
  Eigen::VectorXd times_;
  Eigen::VectorXd values_;
  std::optional<Eigen::VectorXd> quality_;
};

/// One point of a rolling log-slope or elasticity estimate.
struct SlopePoint {
  double t = 0.0;
  double slope = 0.0;
  double se = 0.0;
  double window_half_width = 0.0;
};
using SlopeSeries = std::vector<SlopePoint>;

namespace series {

/// Var(log x) below this inside a window makes a regressor degenerate.
inline constexpr double kDegenerateVarianceTol = 1e-12;

/// Epanechnikov weights 0.75 (1 - u^2) for |u| < 1, u = (t - center) / half_width,
/// multiplied by the series quality weights.
Eigen::VectorXd kernel_weights(const TimeSeries& x, double center_t, double half_width);

// --- ingest / serialize ---------------------------------------------------

TimeSeries parse_csv(std::string_view text, std::string name, std::string_view expected_unit);
TimeSeries ingest_csv(const std::filesystem::path& path, std::string_view expected_unit);
std::string to_csv(const TimeSeries& x);
nlohmann::json to_json(const TimeSeries& x);
TimeSeries from_json(const nlohmann::json& j);

/// Epoch seconds from a float literal or an RFC3339 timestamp.
double parse_timestamp(std::string_view text);
/// Lowercase hex SHA-256 of the given bytes.
std::string content_hash(std::string_view bytes);

// --- transforms -----------------------------------------------------------

/// Weighted least-squares slope of log(value) against t over
/// [center_t - window/2, center_t + window/2].
SlopePoint log_slope(const TimeSeries& x, double window, double center_t);

/// Rolling local slope of log y against log x; one point per sample time whose
/// window holds at least three weighted samples. Grids must coincide.
SlopeSeries elasticity(const TimeSeries& y, const TimeSeries& x, double window);

/// Linear interpolation at t, never extrapolating.
double interpolate(const TimeSeries& x, double t);

/// Uniform grid start, start+step, ... <= end. Defaults to the series range.
TimeSeries resample(const TimeSeries& x, double step, std::optional<double> start = std::nullopt,
                    std::optional<double> end = std::nullopt);

/// D_real + rho_syn * D_synth on a shared grid.
TimeSeries effective_dataset(const TimeSeries& d_real, const TimeSeries& d_synth, double rho_syn);

}  // namespace series
}  // namespace rsicert
