#include "rsicert/certify.hpp"

#include <algorithm>
#include <cmath>

#include "rsicert/error.hpp"
#include "rsicert/stats.hpp"

namespace rsicert {
namespace {

template <class T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> opt_double(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

ExponentInputs ExponentInputs::from_json(const nlohmann::json& j) {
  ExponentInputs e;
  try {
    e.alpha = j.value("alpha", 0.0);
    e.beta = j.value("beta", 0.0);
    e.gamma = j.value("gamma", 0.0);
    e.alpha_tilde = j.value("alpha_tilde", 0.0);
    e.rho = j.value("rho", 0.0);
    e.r = j.value("r", 1.0);
    e.chi_hat = j.value("chi_hat", e.alpha);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ConfigError, std::string("exponents: ") + ex.what());
  }
  return e;
}

nlohmann::json ExponentSet::to_json() const {
  return {{"raw",
           {{"alpha", raw.alpha},
            {"beta", raw.beta},
            {"gamma", raw.gamma},
            {"alpha_tilde", raw.alpha_tilde},
            {"rho", raw.rho},
            {"r", raw.r},
            {"chi_hat", raw.chi_hat}}},
          {"effective",
           {{"alpha_eff", alpha_eff}, {"beta_eff", beta_eff}, {"gamma_eff", gamma_eff}, {"alpha_tilde_eff", alpha_tilde_eff}}},
          {"alpha_cap", alpha_cap},
          {"beta_cap", beta_cap}};
}

Banded Banded::from_json(const nlohmann::json& j) {
  if (j.is_number()) return point(j.get<double>());
  Banded b;
  const double value = j.value("value", 0.0);
  const double se = j.value("se", 0.0);
  b.minus = j.value("minus", value);
  b.plus = j.value("plus", value);
  b.se_minus = j.value("se_minus", se);
  b.se_plus = j.value("se_plus", se);
  return b;
}

nlohmann::json PtotEstimate::to_json() const {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : components) {
    comps.push_back({{"name", c.name}, {"minus", c.minus}, {"plus", c.plus}, {"se_minus", c.se_minus}, {"se_plus", c.se_plus}});
  }
  return {{"minus", minus}, {"plus", plus}, {"se_minus", se_minus}, {"se_plus", se_plus}, {"components", std::move(comps)}};
}

PtotEstimate PtotEstimate::from_json(const nlohmann::json& j) {
  PtotEstimate p;
  p.minus = j.at("minus").get<double>();
  p.plus = j.at("plus").get<double>();
  p.se_minus = j.at("se_minus").get<double>();
  p.se_plus = j.at("se_plus").get<double>();
  for (const auto& c : j.at("components")) {
    p.components.push_back({c.at("name").get<std::string>(), c.at("minus").get<double>(), c.at("plus").get<double>(),
                            c.at("se_minus").get<double>(), c.at("se_plus").get<double>()});
  }
  return p;
}

nlohmann::json TestOutcome::to_json() const { return {{"reject", reject}, {"margin", margin}, {"z", z}}; }

TestOutcome TestOutcome::from_json(const nlohmann::json& j) {
  return {j.at("reject").get<bool>(), j.at("margin").get<double>(), j.at("z").get<double>()};
}

nlohmann::json CeilingTest::to_json() const {
  return {{"reject", reject}, {"lhs", lhs}, {"rhs", rhs}, {"z", z}, {"binding_channel", binding_channel}};
}

nlohmann::json EnvelopeCheck::to_json() const {
  return {{"pass_fraction", pass_fraction}, {"first_failure", opt(first_failure)}, {"samples", times.size()}};
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::NonsingularCertified: return "nonsingular-certified";
    case Verdict::SingularAdmissible: return "singular-admissible";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "nonsingular-certified") return Verdict::NonsingularCertified;
  if (s == "singular-admissible") return Verdict::SingularAdmissible;
  if (s == "inconclusive") return Verdict::Inconclusive;
  throw Error(ErrorCode::ParseError, "unknown verdict '" + s + "'");
}

nlohmann::json Certificate::to_json() const {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : segments) {
    segs.push_back({{"range", {s.t_start, s.t_end}},
                    {"samples", s.samples},
                    {"ptot", s.ptot.to_json()},
                    {"ptot_minus", s.ptot.minus},
                    {"ptot_plus", s.ptot.plus},
                    {"tests", {{"superlinearity", s.superlinearity.to_json()}, {"upper_band", s.upper_band.to_json()}}},
                    {"envelope",
                     {{"pass_fraction", opt(s.envelope_pass_fraction)},
                      {"nonbinding_fraction", opt(s.nonbinding_fraction)},
                      {"nonbinding", s.envelope_nonbinding}}}});
  }
  return {{"verdict", to_string(verdict)},
          {"segments", std::move(segs)},
          {"envelope_pass_fraction", opt(envelope_pass_fraction)},
          {"osgood_divergent", osgood_divergent},
          {"margins",
           {{"ptot_margin", opt(margins.ptot_margin)},
            {"manifold_distance", opt(margins.manifold_distance)},
            {"wasserstein_margin", opt(margins.wasserstein_margin)}}},
          {"event_bound", opt(event_bound)},
          {"reasons", reasons},
          {"config_echo", config_echo},
          {"data_snapshot_versions", data_snapshot_versions},
          {"extras", extras}};
}

Certificate Certificate::from_json(const nlohmann::json& j) {
  Certificate c;
  try {
    c.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    for (const auto& s : j.at("segments")) {
      SegmentRecord r;
      r.t_start = s.at("range").at(0).get<double>();
      r.t_end = s.at("range").at(1).get<double>();
      r.samples = s.at("samples").get<std::size_t>();
      r.ptot = PtotEstimate::from_json(s.at("ptot"));
      r.superlinearity = TestOutcome::from_json(s.at("tests").at("superlinearity"));
      r.upper_band = TestOutcome::from_json(s.at("tests").at("upper_band"));
      const auto& env = s.at("envelope");
      r.envelope_pass_fraction = opt_double(env, "pass_fraction");
      r.nonbinding_fraction = opt_double(env, "nonbinding_fraction");
      r.envelope_nonbinding = env.at("nonbinding").get<bool>();
      c.segments.push_back(std::move(r));
    }
    c.envelope_pass_fraction = opt_double(j, "envelope_pass_fraction");
    c.osgood_divergent = j.at("osgood_divergent").get<bool>();
    const auto& m = j.at("margins");
    c.margins.ptot_margin = opt_double(m, "ptot_margin");
    c.margins.manifold_distance = opt_double(m, "manifold_distance");
    c.margins.wasserstein_margin = opt_double(m, "wasserstein_margin");
    c.event_bound = opt_double(j, "event_bound");
    c.reasons = j.at("reasons").get<std::vector<std::string>>();
    c.config_echo = j.at("config_echo");
    c.data_snapshot_versions = j.at("data_snapshot_versions");
    c.extras = j.value("extras", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("certificate: ") + e.what());
  }
  return c;
}

namespace certify {

ExponentSet effective_exponents(const ExponentInputs& raw) {
  if (!(raw.rho >= 0.0 && raw.rho <= 1.0)) throw Error(ErrorCode::InvalidParams, "rho must lie in [0,1]");
  if (!(raw.r > 0.0 && raw.r <= 1.0)) throw Error(ErrorCode::InvalidParams, "minimax rate r must lie in (0,1]");
  ExponentSet e;
  e.raw = raw;
  const double keep = 1.0 - raw.rho;
  e.alpha_cap = raw.chi_hat < raw.alpha ? "chi_hat" : "alpha";
  e.alpha_eff = keep * std::min(raw.alpha, raw.chi_hat);
  e.beta_cap = raw.beta - raw.r > 0.0 ? "beta-r" : "zero";
  e.beta_eff = keep * std::max(0.0, raw.beta - raw.r);
  e.gamma_eff = keep * raw.gamma;
  e.alpha_tilde_eff = keep * raw.alpha_tilde;
  return e;
}

PtotEstimate ptot(const Banded& q, const Banded& xi, double gamma, const ExponentSet& effs, const Upsilons& upsilons,
                  const std::optional<Eigen::MatrixXd>& cov_minus, const std::optional<Eigen::MatrixXd>& cov_plus) {
  PtotEstimate p;
  auto add = [&p](std::string name, double coef, const Banded& b) {
    p.components.push_back({std::move(name), coef * b.minus, coef * b.plus, std::abs(coef) * b.se_minus,
                            std::abs(coef) * b.se_plus});
  };
  add("q", 1.0, q);
  add("gamma_xi", gamma, xi);
  add("alpha_eff_upsilon_C", effs.alpha_eff, upsilons.C);
  add("beta_eff_upsilon_D", effs.beta_eff, upsilons.D);
  add("alpha_tilde_eff_upsilon_E", effs.alpha_tilde_eff, upsilons.E);

  Eigen::VectorXd se_m(5), se_p(5);
  for (std::size_t i = 0; i < 5; ++i) {
    p.minus += p.components[i].minus;
    p.plus += p.components[i].plus;
    se_m[static_cast<Eigen::Index>(i)] = p.components[i].se_minus;
    se_p[static_cast<Eigen::Index>(i)] = p.components[i].se_plus;
  }
  auto total_se = [](const Eigen::VectorXd& se, const std::optional<Eigen::MatrixXd>& cov) {
    if (!cov) return se.norm();
    if (cov->rows() != 5 || cov->cols() != 5) throw Error(ErrorCode::InvalidParams, "component covariance must be 5x5");
    return std::sqrt(std::max(0.0, cov->sum()));
  };
  p.se_minus = total_se(se_m, cov_minus);
  p.se_plus = total_se(se_p, cov_plus);
  return p;
}

TestOutcome test_superlinearity(double p_hat, double se, double alpha) {
  if (!(se >= 0.0)) throw Error(ErrorCode::InvalidParams, "standard error must be >= 0");
  TestOutcome t;
  t.z = z_upper(alpha);
  t.margin = p_hat - t.z * se - 1.0;
  t.reject = t.margin > 0.0;
  return t;
}

CeilingTest test_ceiling(double upsilon_c_plus, double se, const ChannelCeiling& io, const ChannelCeiling& mem,
                         const ChannelCeiling& pow, double alpha) {
  if (!(se >= 0.0) || !(io.se >= 0.0) || !(mem.se >= 0.0) || !(pow.se >= 0.0)) {
    throw Error(ErrorCode::InvalidParams, "standard errors must be >= 0");
  }
  CeilingTest t;
  t.z = z_upper(alpha / 3.0);
  t.lhs = upsilon_c_plus - t.z * se;
  const std::pair<const char*, const ChannelCeiling*> channels[] = {{"io", &io}, {"mem", &mem}, {"pow", &pow}};
  t.rhs = std::numeric_limits<double>::infinity();
  for (const auto& [name, c] : channels) {
    const double bound = c->value + t.z * c->se;
    if (bound < t.rhs) {
      t.rhs = bound;
      t.binding_channel = name;
    }
  }
  t.reject = t.lhs > t.rhs;
  return t;
}

EnvelopeCheck envelope_check(const TimeSeries& Idot, const TimeSeries& phi_of_I, const TimeSeries& phi_svc,
                             double small_gain, double tol) {
  if (!Idot.same_grid(phi_of_I) || !Idot.same_grid(phi_svc)) {
    throw Error(ErrorCode::GridMismatch, "Idot, Phi(I) and phi_svc grids differ");
  }
  if (!(small_gain >= 0.0 && small_gain < 1.0)) throw Error(ErrorCode::InvalidParams, "small-gain factor must lie in [0,1)");
  if (!(tol >= 0.0)) throw Error(ErrorCode::InvalidParams, "tolerance must be >= 0");
  EnvelopeCheck e;
  e.times = Idot.times();
  const Eigen::Index n = Idot.size();
  e.capacity = phi_of_I.values().cwiseProduct(phi_svc.values());
  e.relative_slack.resize(n);
  e.pass.resize(static_cast<std::size_t>(n));
  Eigen::Index passed = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double demand = (1.0 - small_gain) * Idot.values()[k];
    const bool ok = demand <= e.capacity[k] * (1.0 + tol);
    e.pass[static_cast<std::size_t>(k)] = ok;
    e.relative_slack[k] = e.capacity[k] > 0.0 ? (e.capacity[k] - demand) / e.capacity[k]
                                               : (demand <= 0.0 ? 0.0 : -std::numeric_limits<double>::infinity());
    if (ok) {
      ++passed;
    } else if (!e.first_failure) {
      e.first_failure = e.times[k];
    }
  }
  e.pass_fraction = n > 0 ? static_cast<double>(passed) / static_cast<double>(n) : 0.0;
  return e;
}

Certificate decide(const std::vector<SegmentEvidence>& segments, const std::optional<EnvelopeCheck>& envelope,
                   const dynamics::OsgoodResult& osgood, const DecideOptions& options) {
  Certificate c;
  c.osgood_divergent = osgood.divergent;
  if (envelope) c.envelope_pass_fraction = envelope->pass_fraction;
  if (segments.empty()) {
    c.verdict = Verdict::Inconclusive;
    c.reasons.push_back("empty analysis window: no segment carries a p_tot estimate");
    return c;
  }
  const double z = z_upper(options.alpha);
  double worst_upper = -std::numeric_limits<double>::infinity();
  bool all_upper_ok = true;
  bool any_singular = false;

  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& ev = segments[s];
    SegmentRecord r;
    r.t_start = ev.t_start;
    r.t_end = ev.t_end;
    r.ptot = ev.ptot;
    r.superlinearity = test_superlinearity(ev.ptot.minus, ev.ptot.se_minus, options.alpha);
    r.upper_band.z = z;
    r.upper_band.margin = 1.0 - (ev.ptot.plus + z * ev.ptot.se_plus);
    r.upper_band.reject = r.upper_band.margin < 0.0;
    worst_upper = std::max(worst_upper, ev.ptot.plus + z * ev.ptot.se_plus);
    if (r.upper_band.reject) all_upper_ok = false;

    const bool last = s + 1 == segments.size();
    if (envelope) {
      std::size_t in = 0, passed = 0, nonbinding = 0;
      for (Eigen::Index k = 0; k < envelope->times.size(); ++k) {
        const double t = envelope->times[k];
        if (t < ev.t_start || (last ? t > ev.t_end : t >= ev.t_end)) continue;
        ++in;
        const bool ok = envelope->pass[static_cast<std::size_t>(k)];
        if (ok) ++passed;
        if (ok && envelope->relative_slack[k] >= options.nonbinding_slack) ++nonbinding;
      }
      r.samples = in;
      if (in > 0) {
        r.envelope_pass_fraction = static_cast<double>(passed) / static_cast<double>(in);
        r.nonbinding_fraction = static_cast<double>(nonbinding) / static_cast<double>(in);
        r.envelope_nonbinding = *r.nonbinding_fraction >= options.nonbinding_coverage;
      }
    } else {
      // Disabled envelopes impose no ceiling, so they cannot bind.
      r.envelope_nonbinding = true;
    }
    if (r.superlinearity.reject && r.envelope_nonbinding) any_singular = true;
    c.segments.push_back(std::move(r));
  }
  c.margins.ptot_margin = 1.0 - worst_upper;

  const bool envelope_verified = envelope && envelope->pass_fraction >= 1.0;
  if (all_upper_ok && envelope_verified && osgood.divergent) {
    c.verdict = Verdict::NonsingularCertified;
    return c;
  }
  if (any_singular) {
    c.verdict = Verdict::SingularAdmissible;
    return c;
  }
  c.verdict = Verdict::Inconclusive;
  if (!all_upper_ok) c.reasons.push_back("p_tot upper band exceeds 1 in at least one segment");
  if (!envelope) {
    c.reasons.push_back("envelopes disabled: nonsingularity cannot be certified");
  } else if (!envelope_verified) {
    c.reasons.push_back("measurable envelope fails at " + std::to_string((1.0 - envelope->pass_fraction) * 100.0) +
                        "% of samples");
  }
  if (!osgood.divergent) c.reasons.push_back("Phi is Osgood-convergent");
  bool any_reject = false;
  bool any_binding_reject = false;
  for (const auto& r : c.segments) {
    if (r.superlinearity.reject) {
      any_reject = true;
      if (!r.envelope_nonbinding) any_binding_reject = true;
    }
  }
  if (!any_reject) c.reasons.push_back("superlinearity not established (p_tot- band does not clear 1) in any segment");
  if (any_binding_reject) c.reasons.push_back("superlinearity rejected H0 but the service envelope binds in that segment");
  return c;
}

double event_blowup_bound(double I_t, double delta, double a0) {
  if (!(delta > 0.0) || !(a0 > 0.0) || !(I_t > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "event bound needs delta > 0, a0 > 0, I > 0");
  }
  return std::pow(I_t, -delta) / (a0 * delta);
}

DistributionMargin distribution_margin(double ptot_base, double gamma, double L_xi, double L_rho, double delta_W,
                                       double safety_delta) {
  if (!(L_xi >= 0.0) || !(L_rho >= 0.0) || !(delta_W >= 0.0) || !(gamma >= 0.0)) {
    throw Error(ErrorCode::InvalidParams, "Lipschitz constants, gamma and radius must be >= 0");
  }
  DistributionMargin d;
  d.worst_case_ptot = ptot_base + gamma * L_xi * delta_W + L_rho * delta_W;
  d.threshold = 1.0 - safety_delta;
  d.certified = d.worst_case_ptot <= d.threshold + 1e-12;
  return d;
}

double manifold_distance(double ptot, double grad_norm) {
  if (!(grad_norm > 0.0)) throw Error(ErrorCode::ZeroGradient, "gradient norm must be positive");
  return std::abs(ptot - 1.0) / grad_norm;
}

GovernanceFlag governance(double ptot_plus, double delta) {
  GovernanceFlag g;
  g.margin = (1.0 - delta) - ptot_plus;
  g.throttle = g.margin < 0.0;
  return g;
}

}  // namespace certify
}  // namespace rsicert
