#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsicert/series.hpp"

namespace rsicert::envelopes {

/// Boltzmann constant, J/K (exact SI value).
inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kLn2 = 0.693147180559945309417232121458176568;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
};

/// Relative errors of the static-cap inputs.
struct RelativeErrors {
  double use = 0.0;
  double elec = 0.0;
  double cop = 0.0;
  double power = 0.0;
  double temperature = 0.0;
};

struct EnvelopeParams {
  double sigma_eff = 1.0;  ///< nat per bit
  Range eta_elec{1.0, 1.0};
  Range eta_use{1.0, 1.0};
  Range temperature{300.0, 300.0};  ///< kelvin
  Range cop{1.0, 1.0};
  double p_max = 0.0;  ///< watts
  std::optional<RelativeErrors> rel_errors;
  double alpha = 0.05;
  /// Optional user-supplied hard caps (Bekenstein/Bremermann style bounds are not computed).
  std::optional<double> hard_cap_b_mem;
  std::optional<double> hard_cap_p_use;

  void validate() const;
  static EnvelopeParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

double cop_carnot(double T, double T_hot, double zeta_cop);

/// eta_use * COP/(1+COP) * eta_elec * P_fac.
double usable_power(double p_fac, double cop, double eta_elec, double eta_use);

/// Landauer erasure ceiling P_use / (k_B T ln 2), bit/s.
double erasure_cap(double p_use, double T);

/// (sigma_eff / (k_B ln 2)) * P_use / T, nat/s.
double phi_pt(double p_use, double T, double sigma_eff);
TimeSeries phi_pt(const TimeSeries& p_use, const TimeSeries& T, double sigma_eff);

enum class Binding { PowerTemperature, Io, Memory };
std::string to_string(Binding b);

struct EnvelopeResult {
  TimeSeries phi_pt;
  std::optional<TimeSeries> phi_io;
  std::optional<TimeSeries> phi_mem;
  TimeSeries phi_svc;
  std::vector<Binding> binding;
  std::vector<std::string> warnings;

  /// "io-limited" etc. when one channel binds at every sample.
  std::optional<std::string> dominant_flag() const;
  nlohmann::json to_json() const;
};

/// Pointwise min{phi_PT, sigma_eff B_io, sigma_eff B_mem}; missing bandwidth
/// channels are dropped with an "unconstrained channel" warning.
EnvelopeResult phi_svc(const TimeSeries& phi_pt, const std::optional<TimeSeries>& b_io,
                       const std::optional<TimeSeries>& b_mem, double sigma_eff);

struct UncertaintyBand {
  double first_order = 0.0;  ///< sum of relative errors
  double log_sd = 0.0;       ///< s = sqrt(sum delta^2)
  double lower_factor = 1.0; ///< exp(-z_{1-alpha/2} s)
  double upper_factor = 1.0; ///< exp(+z_{1-alpha/2} s)
};

UncertaintyBand propagate_uncertainty(const RelativeErrors& delta, double alpha = 0.05);

struct StaticCap {
  double value = 0.0;  ///< nat/s
  std::optional<UncertaintyBand> band;
};

/// Worst-case constant ceiling from range maxima of efficiencies and COP, T_min and P_max.
StaticCap static_cap(const EnvelopeParams& params);

struct CeilingCaps {
  SlopePoint io;   ///< rolling-max elasticity of B_io on K (with its SE)
  SlopePoint mem;
  SlopePoint pow;
  double e_ceil = 0.0;
  std::string binding_channel;
};

CeilingCaps ceiling_elasticities(const TimeSeries& K, const TimeSeries& b_io, const TimeSeries& b_mem,
                                 const TimeSeries& p_use_over_T, double window);

/// COP per sample with precedence per-sample series > Carnot model > band midpoint.
struct CarnotModel {
  double t_hot = 0.0;
  double zeta_cop = 0.0;
};
TimeSeries resolve_cop(const TimeSeries& T, const std::optional<TimeSeries>& per_sample,
                       const std::optional<CarnotModel>& model, const Range& band);

}  // namespace rsicert::envelopes
