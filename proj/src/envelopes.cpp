#include "rsicert/envelopes.hpp"

#include <algorithm>
#include <cmath>

#include "rsicert/error.hpp"
#include "rsicert/stats.hpp"

namespace rsicert::envelopes {
namespace {

void check_range(const Range& r, const char* name, double min_lo, double max_hi) {
  if (!(r.lo <= r.hi) || r.lo < min_lo || r.hi > max_hi) {
    throw Error(ErrorCode::InvalidParams, std::string(name) + " range is not ordered or out of bounds");
  }
}

Range range_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw Error(ErrorCode::ConfigError, "ranges are [lo, hi] pairs");
  return {v[0], v[1]};
}

}  // namespace

void EnvelopeParams::validate() const {
  if (!(sigma_eff > 0.0)) throw Error(ErrorCode::InvalidParams, "sigma_eff must be positive");
  if (!(eta_elec.lo > 0.0)) throw Error(ErrorCode::InvalidParams, "eta_elec must lie in (0,1]");
  if (!(eta_use.lo > 0.0)) throw Error(ErrorCode::InvalidParams, "eta_use must lie in (0,1]");
  check_range(eta_elec, "eta_elec", 0.0, 1.0);
  check_range(eta_use, "eta_use", 0.0, 1.0);
  if (!(temperature.lo > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "T_min must be positive");
  check_range(temperature, "T", 0.0, INFINITY);
  check_range(cop, "COP", 0.0, INFINITY);
  if (!(p_max >= 0.0) || !std::isfinite(p_max)) throw Error(ErrorCode::InvalidParams, "P_max must be finite and >= 0");
}

EnvelopeParams EnvelopeParams::from_json(const nlohmann::json& j) {
  EnvelopeParams p;
  try {
    p.sigma_eff = j.value("sigma_eff", 1.0);
    p.eta_elec = range_from_json(j.at("eta_elec_range"));
    p.eta_use = range_from_json(j.at("eta_use_range"));
    p.temperature = range_from_json(j.at("T_range"));
    p.cop = range_from_json(j.at("cop_range"));
    p.p_max = j.at("P_max").get<double>();
    p.alpha = j.value("alpha", 0.05);
    if (j.contains("rel_errors")) {
      const auto& d = j.at("rel_errors");
      p.rel_errors = RelativeErrors{d.at("use").get<double>(), d.at("elec").get<double>(), d.at("cop").get<double>(),
                                    d.at("P").get<double>(), d.at("T").get<double>()};
    }
    if (j.contains("hard_cap_B_mem")) p.hard_cap_b_mem = j.at("hard_cap_B_mem").get<double>();
    if (j.contains("hard_cap_P_use")) p.hard_cap_p_use = j.at("hard_cap_P_use").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("envelope params: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json EnvelopeParams::to_json() const {
  nlohmann::json j = {{"sigma_eff", sigma_eff},
                      {"eta_elec_range", {eta_elec.lo, eta_elec.hi}},
                      {"eta_use_range", {eta_use.lo, eta_use.hi}},
                      {"T_range", {temperature.lo, temperature.hi}},
                      {"cop_range", {cop.lo, cop.hi}},
                      {"P_max", p_max},
                      {"k_B", kBoltzmann},
                      {"alpha", alpha}};
  if (rel_errors) {
    j["rel_errors"] = {{"use", rel_errors->use},
                       {"elec", rel_errors->elec},
                       {"cop", rel_errors->cop},
                       {"P", rel_errors->power},
                       {"T", rel_errors->temperature}};
  }
  if (hard_cap_b_mem) j["hard_cap_B_mem"] = *hard_cap_b_mem;
  if (hard_cap_p_use) j["hard_cap_P_use"] = *hard_cap_p_use;
  return j;
}

double cop_carnot(double T, double T_hot, double zeta_cop) {
  if (!(T > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "T must be positive");
  if (!(T < T_hot)) throw Error(ErrorCode::TemperatureOrdering, "Carnot COP needs T < T_hot");
  return zeta_cop * T / (T_hot - T);
}

double usable_power(double p_fac, double cop, double eta_elec, double eta_use) {
  if (p_fac < 0.0) throw Error(ErrorCode::NegativePower, "facility power must be >= 0");
  if (cop < 0.0) throw Error(ErrorCode::InvalidParams, "COP must be >= 0");
  if (!(eta_elec > 0.0 && eta_elec <= 1.0) || !(eta_use > 0.0 && eta_use <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "efficiencies must lie in (0,1]");
  }
  return eta_use * (cop / (1.0 + cop)) * eta_elec * p_fac;
}

double erasure_cap(double p_use, double T) {
  if (!(T > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "T must be positive");
  return p_use / (kBoltzmann * T * kLn2);
}

double phi_pt(double p_use, double T, double sigma_eff) {
  if (!(T > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "T must be positive");
  return (sigma_eff / (kBoltzmann * kLn2)) * p_use / T;
}

TimeSeries phi_pt(const TimeSeries& p_use, const TimeSeries& T, double sigma_eff) {
  if (!p_use.same_grid(T)) throw Error(ErrorCode::GridMismatch, "P_use and T grids differ");
  if ((T.values().array() <= 0.0).any()) throw Error(ErrorCode::NonPositiveTemperature, "T must be positive");
  Eigen::VectorXd v = (sigma_eff / (kBoltzmann * kLn2)) * (p_use.values().array() / T.values().array());
  return p_use.with_values(std::move(v), "phi_PT", "nat/s");
}

std::string to_string(Binding b) {
  switch (b) {
    case Binding::PowerTemperature: return "pt-limited";
    case Binding::Io: return "io-limited";
    case Binding::Memory: return "mem-limited";
  }
  return "unknown";
}

std::optional<std::string> EnvelopeResult::dominant_flag() const {
  if (binding.empty()) return std::nullopt;
  if (std::all_of(binding.begin(), binding.end(), [&](Binding b) { return b == binding.front(); })) {
    return to_string(binding.front());
  }
  return std::nullopt;
}

nlohmann::json EnvelopeResult::to_json() const {
  nlohmann::json samples = nlohmann::json::array();
  for (Eigen::Index i = 0; i < phi_svc.size(); ++i) {
    nlohmann::json s = {{"t", phi_svc.times()[i]},
                        {"phi_pt", phi_pt.values()[i]},
                        {"phi_svc", phi_svc.values()[i]},
                        {"binding", to_string(binding[static_cast<std::size_t>(i)])}};
    if (phi_io) s["phi_io"] = phi_io->values()[i];
    if (phi_mem) s["phi_mem"] = phi_mem->values()[i];
    samples.push_back(std::move(s));
  }
  return {{"unit", "nat/s"}, {"samples", std::move(samples)}, {"warnings", warnings}};
}

EnvelopeResult phi_svc(const TimeSeries& phi_pt_series, const std::optional<TimeSeries>& b_io,
                       const std::optional<TimeSeries>& b_mem, double sigma_eff) {
  std::vector<std::string> warnings;
  std::optional<TimeSeries> io, mem;
  if (b_io) {
    if (!b_io->same_grid(phi_pt_series)) throw Error(ErrorCode::GridMismatch, "B_io grid differs from phi_PT");
    io = b_io->with_values(sigma_eff * b_io->values(), "phi_io", "nat/s");
  } else {
    warnings.emplace_back("unconstrained channel: B_io missing, phi_svc ignores I/O");
  }
  if (b_mem) {
    if (!b_mem->same_grid(phi_pt_series)) throw Error(ErrorCode::GridMismatch, "B_mem grid differs from phi_PT");
    mem = b_mem->with_values(sigma_eff * b_mem->values(), "phi_mem", "nat/s");
  } else {
    warnings.emplace_back("unconstrained channel: B_mem missing, phi_svc ignores memory bandwidth");
  }

  const Eigen::Index n = phi_pt_series.size();
  Eigen::VectorXd svc(n);
  std::vector<Binding> binding(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = phi_pt_series.values()[i];
    Binding b = Binding::PowerTemperature;
    if (io && io->values()[i] < v) {
      v = io->values()[i];
      b = Binding::Io;
    }
    if (mem && mem->values()[i] < v) {
      v = mem->values()[i];
      b = Binding::Memory;
    }
    svc[i] = v;
    binding[static_cast<std::size_t>(i)] = b;
  }
  TimeSeries svc_series = phi_pt_series.with_values(std::move(svc), "phi_svc", "nat/s");
  return {phi_pt_series, std::move(io), std::move(mem), std::move(svc_series), std::move(binding),
          std::move(warnings)};
}

UncertaintyBand propagate_uncertainty(const RelativeErrors& d, double alpha) {
  if (d.use < 0.0 || d.elec < 0.0 || d.cop < 0.0 || d.power < 0.0 || d.temperature < 0.0) {
    throw Error(ErrorCode::NegativeDelta, "relative errors must be >= 0");
  }
  UncertaintyBand band;
  band.first_order = d.use + d.elec + d.cop + d.power + d.temperature;
  band.log_sd = std::sqrt(d.use * d.use + d.elec * d.elec + d.cop * d.cop + d.power * d.power +
                          d.temperature * d.temperature);
  const double z = normal_quantile(1.0 - alpha / 2.0);
  band.lower_factor = std::exp(-z * band.log_sd);
  band.upper_factor = std::exp(z * band.log_sd);
  return band;
}

StaticCap static_cap(const EnvelopeParams& params) {
  params.validate();
  const double cop_max = params.cop.hi;
  StaticCap cap;
  cap.value = (params.sigma_eff / (kBoltzmann * kLn2)) *
              (params.eta_use.hi * params.eta_elec.hi / params.temperature.lo) * (cop_max / (1.0 + cop_max)) *
              params.p_max;
  if (params.rel_errors) cap.band = propagate_uncertainty(*params.rel_errors, params.alpha);
  return cap;
}

CeilingCaps ceiling_elasticities(const TimeSeries& K, const TimeSeries& b_io, const TimeSeries& b_mem,
                                 const TimeSeries& p_use_over_T, double window) {
  auto rolling_max = [&](const TimeSeries& channel) {
    const SlopeSeries s = series::elasticity(channel, K, window);
    if (s.empty()) throw Error(ErrorCode::InsufficientWindow, "no window for channel '" + channel.name() + "'");
    return *std::max_element(s.begin(), s.end(),
                             [](const SlopePoint& a, const SlopePoint& b) { return a.slope < b.slope; });
  };
  CeilingCaps caps;
  caps.io = rolling_max(b_io);
  caps.mem = rolling_max(b_mem);
  caps.pow = rolling_max(p_use_over_T);
  caps.e_ceil = caps.io.slope;
  caps.binding_channel = "io";
  if (caps.mem.slope < caps.e_ceil) {
    caps.e_ceil = caps.mem.slope;
    caps.binding_channel = "mem";
  }
  if (caps.pow.slope < caps.e_ceil) {
    caps.e_ceil = caps.pow.slope;
    caps.binding_channel = "pow";
  }
  return caps;
}

TimeSeries resolve_cop(const TimeSeries& T, const std::optional<TimeSeries>& per_sample,
                       const std::optional<CarnotModel>& model, const Range& band) {
  if (per_sample) {
    if (!per_sample->same_grid(T)) throw Error(ErrorCode::GridMismatch, "COP series grid differs from T");
    return per_sample->with_values(per_sample->values(), "COP", "dimensionless");
  }
  Eigen::VectorXd cop(T.size());
  for (Eigen::Index i = 0; i < T.size(); ++i) {
    cop[i] = model ? cop_carnot(T.values()[i], model->t_hot, model->zeta_cop) : band.mid();
  }
  return T.with_values(std::move(cop), "COP", "dimensionless");
}

}  // namespace rsicert::envelopes
