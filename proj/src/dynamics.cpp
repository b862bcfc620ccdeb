#include "rsicert/dynamics.hpp"

#include <boost/math/special_functions/expint.hpp>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>

#include "rsicert/error.hpp"

namespace rsicert::dynamics {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

/// Exponent fitted by least squares on the last decade of a table (at least two knots).
double fit_tail_exponent(const TabulatedPhi& t) {
  const Eigen::Index n = t.I.size();
  const double cutoff = t.I[n - 1] / 10.0;
  Eigen::Index first = n - 2;
  while (first > 0 && t.I[first - 1] >= cutoff) --first;
  const Eigen::Index m = n - first;
  const Eigen::ArrayXd x = t.I.tail(m).array().log();
  const Eigen::ArrayXd y = t.phi.tail(m).array().log();
  const double xb = x.mean();
  const double yb = y.mean();
  return ((x - xb) * (y - yb)).sum() / (x - xb).square().sum();
}

/// Integral of ds / (phi_a (s/a)^k) over [a, b], i.e. a/phi_a * (((b/a)^{1-k} - 1) / (1-k)).
double power_piece_integral(double a, double b, double phi_a, double k) {
  const double L = std::log(b / a);
  const double m = 1.0 - k;
  const double factor = std::abs(m * L) < 1e-12 ? L * (1.0 + 0.5 * m * L) : std::expm1(m * L) / m;
  return a / phi_a * factor;
}

}  // namespace

PhiSpec::PhiSpec(Kind kind, double domain_floor) : kind_(std::move(kind)), floor_(domain_floor) {
  if (!(floor_ > 0.0)) throw Error(ErrorCode::NonPositivePhi, "domain floor must be positive");
  std::visit(Overloaded{
                 [&](const PowerPhi& k) {
                   if (!(k.c > 0.0) || !(k.p >= 0.0)) {
                     throw Error(ErrorCode::NonPositivePhi, "power envelope needs c > 0 and p >= 0");
                   }
                   tail_exponent_ = k.p;
                 },
                 [&](const PowerLogPhi& k) {
                   if (!(k.c > 0.0) || !(k.p >= 0.0) || !(floor_ > 1.0)) {
                     throw Error(ErrorCode::NonPositivePhi, "power-log envelope needs c > 0, p >= 0, floor > 1");
                   }
                   tail_exponent_ = k.p;
                 },
                 [&](const TabulatedPhi& k) {
                   if (k.I.size() < 2 || k.I.size() != k.phi.size()) {
                     throw Error(ErrorCode::NonPositivePhi, "tabulated envelope needs >= 2 matching knots");
                   }
                   for (Eigen::Index i = 0; i < k.I.size(); ++i) {
                     if (!(k.phi[i] > 0.0) || !(k.I[i] > 0.0)) {
                       throw Error(ErrorCode::NonPositivePhi, "tabulated envelope must be positive");
                     }
                     if (i > 0 && !(k.I[i] > k.I[i - 1])) {
                       throw Error(ErrorCode::InvalidParams, "tabulated grid must be strictly increasing");
                     }
                     if (i > 0 && k.phi[i] < k.phi[i - 1]) {
                       throw Error(ErrorCode::InvalidParams, "tabulated envelope must be nondecreasing");
                     }
                   }
                   if (floor_ < k.I[0]) throw Error(ErrorCode::InvalidParams, "floor below the first knot");
                   tail_exponent_ = std::max(0.0, fit_tail_exponent(k));
                 },
             },
             kind_);
}

PhiSpec PhiSpec::power(double p, double c, double domain_floor) { return PhiSpec(PowerPhi{p, c}, domain_floor); }

PhiSpec PhiSpec::power_log(double p, double c, double domain_floor) {
  return PhiSpec(PowerLogPhi{p, c}, domain_floor);
}

PhiSpec PhiSpec::tabulated(Eigen::VectorXd I, Eigen::VectorXd phi) {
  const double floor = I.size() > 0 ? I[0] : 0.0;
  return PhiSpec(TabulatedPhi{std::move(I), std::move(phi)}, floor);
}

double PhiSpec::operator()(double s) const {
  s = std::max(s, floor_);
  return std::visit(Overloaded{
                        [&](const PowerPhi& k) { return k.c * std::pow(s, k.p); },
                        [&](const PowerLogPhi& k) { return k.c * std::pow(s, k.p) * std::log(s); },
                        [&](const TabulatedPhi& k) {
                          const Eigen::Index n = k.I.size();
                          if (s >= k.I[n - 1]) return k.phi[n - 1] * std::pow(s / k.I[n - 1], tail_exponent_);
                          const auto* it = std::upper_bound(k.I.data(), k.I.data() + n, s);
                          const auto i = static_cast<Eigen::Index>(it - k.I.data()) - 1;
                          const double slope = std::log(k.phi[i + 1] / k.phi[i]) / std::log(k.I[i + 1] / k.I[i]);
                          return k.phi[i] * std::pow(s / k.I[i], slope);
                        },
                    },
                    kind_);
}

double PhiSpec::tail_exponent() const { return tail_exponent_; }

PhiSpec PhiSpec::scaled(double factor) const {
  if (!(factor > 0.0)) throw Error(ErrorCode::NonPositivePhi, "scale factor must be positive");
  Kind k = std::visit(Overloaded{
                          [&](const PowerPhi& p) -> Kind { return PowerPhi{p.p, p.c * factor}; },
                          [&](const PowerLogPhi& p) -> Kind { return PowerLogPhi{p.p, p.c * factor}; },
                          [&](const TabulatedPhi& p) -> Kind { return TabulatedPhi{p.I, p.phi * factor}; },
                      },
                      kind_);
  return PhiSpec(std::move(k), floor_);
}

PhiSpec PhiSpec::from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "power") {
      return power(j.at("p").get<double>(), j.value("c", 1.0), j.value("floor", 1.0));
    }
    if (kind == "power_log") {
      return power_log(j.at("p").get<double>(), j.value("c", 1.0), j.value("floor", 2.0));
    }
    if (kind == "tabulated") {
      const auto I = j.at("I").get<std::vector<double>>();
      const auto phi = j.at("phi").get<std::vector<double>>();
      Eigen::VectorXd vi = Eigen::Map<const Eigen::VectorXd>(I.data(), static_cast<Eigen::Index>(I.size()));
      Eigen::VectorXd vp = Eigen::Map<const Eigen::VectorXd>(phi.data(), static_cast<Eigen::Index>(phi.size()));
      const double floor = j.value("floor", I.empty() ? 1.0 : I.front());
      return PhiSpec(TabulatedPhi{std::move(vi), std::move(vp)}, floor);
    }
    throw Error(ErrorCode::ConfigError, "unknown phi kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("phi spec: ") + e.what());
  }
}

nlohmann::json PhiSpec::to_json() const {
  return std::visit(
      Overloaded{
          [&](const PowerPhi& k) -> nlohmann::json {
            return {{"kind", "power"}, {"p", k.p}, {"c", k.c}, {"floor", floor_}};
          },
          [&](const PowerLogPhi& k) -> nlohmann::json {
            return {{"kind", "power_log"}, {"p", k.p}, {"c", k.c}, {"floor", floor_}};
          },
          [&](const TabulatedPhi& k) -> nlohmann::json {
            return {{"kind", "tabulated"},
                    {"I", std::vector<double>(k.I.data(), k.I.data() + k.I.size())},
                    {"phi", std::vector<double>(k.phi.data(), k.phi.data() + k.phi.size())},
                    {"floor", floor_}};
          },
      },
      kind_);
}

OsgoodResult osgood_classify(const PhiSpec& phi, double I0) {
  if (!(I0 >= phi.domain_floor())) {
    throw Error(ErrorCode::InvalidParams, "I0 below the envelope's domain floor");
  }
  return std::visit(
      Overloaded{
          [&](const PowerPhi& k) -> OsgoodResult {
            if (k.p <= 1.0) return {true, kInf};
            return {false, std::pow(I0, 1.0 - k.p) / (k.c * (k.p - 1.0))};
          },
          [&](const PowerLogPhi& k) -> OsgoodResult {
            // u = log s turns the integral into E1((p-1) log I0) / c.
            if (k.p <= 1.0) return {true, kInf};
            return {false, boost::math::expint(1, (k.p - 1.0) * std::log(I0)) / k.c};
          },
          [&](const TabulatedPhi& k) -> OsgoodResult {
            const double tail = phi.tail_exponent();
            if (tail <= 1.0 + kUnitExponentTol) return {true, kInf};
            const Eigen::Index n = k.I.size();
            double total = 0.0;
            double a = I0;
            for (Eigen::Index i = 0; i + 1 < n; ++i) {
              if (k.I[i + 1] <= a) continue;
              const double b = k.I[i + 1];
              const double slope = std::log(k.phi[i + 1] / k.phi[i]) / std::log(k.I[i + 1] / k.I[i]);
              total += power_piece_integral(a, b, phi(a), slope);
              a = b;
            }
            // Analytic tail: integral of ds / (phi(a) (s/a)^tail) from a to infinity.
            total += a / (phi(a) * (tail - 1.0));
            return {false, total};
          },
      },
      phi.kind());
}

BlowupBound blowup_bound(double I0, double I1, double a0, double p) {
  if (!(p > 1.0)) throw Error(ErrorCode::SubcriticalExponent, "blow-up bound needs p > 1");
  if (!(a0 > 0.0) || !(I0 > 0.0) || !(I1 > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "blow-up bound needs a0, I0, I1 > 0");
  }
  if (I0 >= I1) return {std::pow(I0, 1.0 - p) / (a0 * (p - 1.0)), false};
  return {std::pow(I1, 1.0 - p) / (a0 * (p - 1.0)), true};
}

double powerlaw_blowup_time(double I0, double a0, double p) {
  if (p <= 1.0 + kUnitExponentTol) return kInf;
  return std::pow(I0, 1.0 - p) / (a0 * (p - 1.0));
}

double powerlaw_solution(double I0, double a0, double p, double t) {
  if (!(I0 > 0.0) || !(a0 >= 0.0)) throw Error(ErrorCode::InvalidParams, "power-law solution needs I0 > 0, a0 >= 0");
  if (std::abs(p - 1.0) < kUnitExponentTol) return I0 * std::exp(a0 * t);
  const double base = std::pow(I0, 1.0 - p) - a0 * (p - 1.0) * t;
  if (p > 1.0 && !(base > 0.0)) {
    throw Error(ErrorCode::BeyondBlowup, "t=" + std::to_string(t) + " is at or beyond the blow-up time");
  }
  return std::pow(base, -1.0 / (p - 1.0));
}

Rhs envelope_rhs(std::function<double(double)> a, PhiSpec phi, std::function<double(double, double)> chi) {
  return [a = std::move(a), phi = std::move(phi), chi = std::move(chi)](double t, double I) {
    double v = a(t) * phi(I);
    if (chi) v += chi(t, I);
    return v;
  };
}

namespace {

constexpr double kHodographSwitch = 1e-8;

IntegrationResult pack(Outcome outcome, double t_end, double I_end, std::vector<double>& ts, std::vector<double>& vs,
                       std::size_t accepted) {
  if (t_end > ts.back()) {
    ts.push_back(t_end);
    vs.push_back(I_end);
  }
  const auto n = static_cast<Eigen::Index>(ts.size());
  return IntegrationResult{outcome, t_end, I_end,
                           TimeSeries("I", "nat", Eigen::Map<Eigen::VectorXd>(ts.data(), n),
                                      Eigen::Map<Eigen::VectorXd>(vs.data(), n)),
                           accepted};
}

// Integrates dt/ds = I / rhs(t, I) with I = e^s from the current state up to the threshold.
IntegrationResult hodograph(const Rhs& rhs, double t_start, double I_start, double horizon, double threshold,
                            const IntegrateOptions& options, std::vector<double>& ts, std::vector<double>& vs,
                            std::size_t accepted) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 1>;
  bool stalled = false;
  auto system = [&](const State& x, State& dtds, double s) {
    const double I = std::exp(s);
    const double f = rhs(x[0], I);
    if (!(f > 0.0) || !std::isfinite(f)) stalled = true;
    dtds[0] = f > 0.0 ? I / f : 0.0;
  };
  const double s0 = std::log(I_start), s_end = std::log(threshold);
  auto stepper = odeint::make_dense_output(options.abs_tol, options.rel_tol, odeint::runge_kutta_dopri5<State>());
  stepper.initialize(State{t_start}, s0, std::min(1e-3, s_end - s0));
  for (std::size_t step = 0; step < options.max_steps; ++step) {
    const auto [sa, sb] = stepper.do_step(system);
    ++accepted;
    if (stalled) {
      throw Error(ErrorCode::StepUnderflowWithoutThreshold,
                  "growth rate stopped being positive near t=" + std::to_string(stepper.current_state()[0]) +
                      " below the blow-up threshold");
    }
    const double tb = stepper.current_state()[0];
    if (tb >= horizon) {
      // Locate I(horizon) by bisection on the dense output in s.
      double lo = sa, hi = sb;
      State x{};
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        stepper.calc_state(mid, x);
        (x[0] < horizon ? lo : hi) = mid;
      }
      return pack(Outcome::Completed, horizon, std::exp(lo), ts, vs, accepted);
    }
    if (sb >= s_end) {
      State x{};
      stepper.calc_state(s_end, x);
      return pack(Outcome::BlowupDetected, std::min(x[0], horizon), threshold, ts, vs, accepted);
    }
    if (tb > ts.back()) {
      ts.push_back(tb);
      vs.push_back(std::exp(sb));
    }
  }
  throw Error(ErrorCode::StepUnderflowWithoutThreshold, "step budget exhausted before the threshold");
}

}  // namespace

IntegrationResult integrate(const Rhs& rhs, double I0, double horizon, double threshold,
                            const IntegrateOptions& options) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 1>;
  if (!(threshold > I0)) throw Error(ErrorCode::InvalidParams, "blow-up threshold must exceed I0");
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidParams, "horizon must be positive");

  auto system = [&rhs](const State& x, State& dxdt, double t) { dxdt[0] = rhs(t, x[0]); };
  auto stepper = odeint::make_dense_output(options.abs_tol, options.rel_tol, odeint::runge_kutta_dopri5<State>());
  stepper.initialize(State{I0}, 0.0, std::min(options.initial_step, horizon));

  std::vector<double> ts{0.0};
  std::vector<double> vs{I0};
  std::size_t accepted = 0;

  auto finish = [&](Outcome outcome, double t_end, double I_end) {
    return pack(outcome, t_end, I_end, ts, vs, accepted);
  };

  for (std::size_t step = 0; step < options.max_steps; ++step) {
    const auto [t0, t1] = stepper.do_step(system);
    ++accepted;
    const double I1 = stepper.current_state()[0];
    const bool crossed = !std::isfinite(I1) || I1 >= threshold;
    if (crossed) {
      // Bisect the dense output for the first time I reaches the threshold.
      double lo = t0, hi = t1;
      State x{};
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        stepper.calc_state(mid, x);
        if (std::isfinite(x[0]) && x[0] < threshold) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      return finish(Outcome::BlowupDetected, hi, threshold);
    }
    if (t1 >= horizon) {
      State x{};
      stepper.calc_state(horizon, x);
      return finish(Outcome::Completed, horizon, x[0]);
    }
    ts.push_back(t1);
    vs.push_back(I1);
    const double dt = stepper.current_time_step();
    if (dt < kHodographSwitch * std::max(1.0, std::abs(t1)) && I1 > 0.0 && rhs(t1, I1) > 0.0) {
      // Time steps are approaching the resolution of t: continue with t as a function of s = log I.
      return hodograph(rhs, t1, I1, horizon, threshold, options, ts, vs, accepted);
    }
    if (dt < options.min_step * std::max(1.0, std::abs(t1))) {
      throw Error(ErrorCode::StepUnderflowWithoutThreshold,
                  "step size collapsed at t=" + std::to_string(t1) + " with I=" + std::to_string(I1) +
                      " below the blow-up threshold");
    }
  }
  throw Error(ErrorCode::StepUnderflowWithoutThreshold, "step budget exhausted before the horizon");
}

DiscreteRsiResult discrete_rsi(double I0, double a, double p, double threshold) {
  if (!(a > 0.0) || !(p > 1.0) || !(I0 > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "discrete recursion needs a > 0, p > 1, I0 > 0");
  }
  DiscreteRsiResult r;
  r.published_step_bound = static_cast<std::size_t>(std::ceil(std::pow(I0, 1.0 - p) / (a * (p - 1.0))));
  r.sequence.push_back(I0);
  double I = I0;
  while (I < threshold) {
    I = I + a * std::pow(I, p);
    r.sequence.push_back(I);
    if (r.sequence.size() > 100000) break;
  }
  r.steps_to_threshold = r.sequence.size();
  r.index_at_threshold = r.sequence.size() - 1;
  r.bound_respected = r.index_at_threshold <= r.published_step_bound;
  r.discrepancy = !r.bound_respected;
  return r;
}

std::vector<double> discrete_log_trajectory(double I0, double a, double p, std::size_t steps) {
  if (!(a > 0.0) || !(I0 > 0.0)) throw Error(ErrorCode::InvalidParams, "recursion needs a > 0, I0 > 0");
  const double log_a = std::log(a);
  std::vector<double> L{std::log(I0)};
  for (std::size_t n = 0; n < steps; ++n) {
    // log(I + a I^p) = L + log1p(a I^{p-1}); rewritten once the increment dominates.
    const double e = log_a + (p - 1.0) * L.back();
    const double next = e < 30.0 ? L.back() + std::log1p(std::exp(e)) : L.back() + e + std::log1p(std::exp(-e));
    L.push_back(next);
  }
  return L;
}

double loglog_growth_slope(const std::vector<double>& log_I, std::size_t tail) {
  if (tail < 2 || tail > log_I.size()) throw Error(ErrorCode::InvalidParams, "tail must span 2..size iterates");
  const std::size_t start = log_I.size() - tail;
  Eigen::ArrayXd n(static_cast<Eigen::Index>(tail)), y(static_cast<Eigen::Index>(tail));
  for (std::size_t k = 0; k < tail; ++k) {
    if (!(log_I[start + k] > 0.0)) throw Error(ErrorCode::NonPositiveValue, "log I must be positive for log log");
    n[static_cast<Eigen::Index>(k)] = static_cast<double>(start + k);
    y[static_cast<Eigen::Index>(k)] = std::log(log_I[start + k]);
  }
  const double nb = n.mean();
  return ((n - nb) * (y - y.mean())).sum() / (n - nb).square().sum();
}

SublinearCheck discrete_sublinear_check(const std::vector<double>& sequence, double A, double p) {
  SublinearCheck check;
  for (std::size_t n = 0; n + 1 < sequence.size(); ++n) {
    if (sequence[n + 1] - sequence[n] > A * std::pow(1.0 + sequence[n], p)) {
      check.pass = false;
      check.first_failure = n;
      break;
    }
  }
  return check;
}

void CapitalParams::validate() const {
  if (!(K0 > 0.0) || !(r > 0.0) || !(zeta >= 0.0) || !(delta >= 0.0)) {
    throw Error(ErrorCode::InvalidParams, "capital parameters need K0 > 0, r > 0, zeta >= 0, delta >= 0");
  }
}

CapitalParams CapitalParams::from_json(const nlohmann::json& j) {
  CapitalParams c;
  try {
    c.K0 = j.at("K0").get<double>();
    c.r = j.at("r").get<double>();
    c.zeta = j.at("zeta").get<double>();
    c.delta = j.value("delta", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("capital params: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json CapitalParams::to_json() const { return {{"K0", K0}, {"r", r}, {"zeta", zeta}, {"delta", delta}}; }

std::string to_string(CapitalRegime regime) {
  switch (regime) {
    case CapitalRegime::FiniteTime: return "finite-time";
    case CapitalRegime::Exponential: return "exponential";
    case CapitalRegime::Polynomial: return "polynomial";
  }
  return "unknown";
}

CapitalLower capital_lower(const CapitalParams& params, double t) {
  params.validate();
  const double half_r = 0.5 * params.r;
  CapitalLower out;
  if (std::abs(params.zeta - 1.0) < kUnitExponentTol) {
    out.regime = CapitalRegime::Exponential;
    out.K_lower = params.K0 * std::exp(half_r * t);
    return out;
  }
  if (params.zeta < 1.0) {
    out.regime = CapitalRegime::Polynomial;
    const double m = 1.0 - params.zeta;
    out.K_lower = std::pow(std::pow(params.K0, m) + half_r * m * t, 1.0 / m);
    return out;
  }
  const double m = params.zeta - 1.0;
  out.regime = CapitalRegime::FiniteTime;
  out.T_K = 2.0 * std::pow(params.K0, -m) / (params.r * m);
  const double base = std::pow(params.K0, -m) - half_r * m * t;
  if (!(base > 0.0)) throw Error(ErrorCode::BeyondBlowup, "t is at or beyond T_K");
  out.K_lower = std::pow(base, -1.0 / m);
  return out;
}

double logistic_data(double D_max, double nu, double rate, double t) {
  if (!(D_max > 0.0) || !(nu > 0.0) || !(rate > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "logistic data needs D_max, nu, rate > 0");
  }
  return D_max / (1.0 + nu * std::exp(-rate * t));
}

std::string to_string(RobustVerdict v) {
  switch (v) {
    case RobustVerdict::RobustNonsingular: return "robust-nonsingular";
    case RobustVerdict::RobustBlowup: return "robust-blowup";
    case RobustVerdict::Indeterminate: return "indeterminate";
  }
  return "unknown";
}

WorstCaseTimes worst_case_times(const PhiSpec& a_min, const PhiSpec& a_max, double I0) {
  constexpr int kGrid = 241;
  for (int i = 0; i < kGrid; ++i) {
    const double s = I0 * std::pow(10.0, 6.0 * i / (kGrid - 1));
    if (a_min(s) > a_max(s) * (1.0 + 1e-12)) {
      throw Error(ErrorCode::EnvelopeOrderViolation, "a_min exceeds a_max at s=" + std::to_string(s));
    }
  }
  WorstCaseTimes w;
  w.T_min = osgood_classify(a_max, I0).value;
  w.T_max = osgood_classify(a_min, I0).value;
  if (std::isinf(w.T_min)) {
    w.verdict = RobustVerdict::RobustNonsingular;
  } else if (std::isfinite(w.T_max)) {
    w.verdict = RobustVerdict::RobustBlowup;
  }
  return w;
}

std::string to_string(Region r) {
  switch (r) {
    case Region::ASupercritical: return "A-supercritical";
    case Region::ASubcritical: return "A-subcritical";
    case Region::BCapped: return "B-capped";
    case Region::CLogistic: return "C-logistic";
  }
  return "unknown";
}

std::string to_string(Conclusion c) {
  switch (c) {
    case Conclusion::FiniteTimeBlowup: return "finite-time blow-up";
    case Conclusion::Nonsingular: return "nonsingular";
    case Conclusion::Conditional: return "conditional";
  }
  return "unknown";
}

RegionVerdict classify_region(double zeta, double p, const RegionFlags& flags,
                              const std::optional<CapitalParams>& capital) {
  if (flags.capped_power && flags.logistic_data) {
    throw Error(ErrorCode::AmbiguousFlags, "capped power and logistic data cannot both be the dominant channel");
  }
  RegionVerdict v;
  if (flags.capped_power) {
    v.region = Region::BCapped;
    if (p <= 1.0) {
      v.conclusion = Conclusion::Nonsingular;
      v.note = "capped service with p <= 1: Osgood integral diverges";
    } else if (flags.baseline_effort_floor) {
      v.conclusion = Conclusion::FiniteTimeBlowup;
      v.note = "p > 1 with a positive baseline effort floor";
    } else {
      v.conclusion = Conclusion::Conditional;
      v.note = "p > 1 but no baseline effort floor supplied";
    }
    return v;
  }
  if (flags.logistic_data) {
    v.region = Region::CLogistic;
    v.conclusion = p <= 1.0 ? Conclusion::Nonsingular : Conclusion::FiniteTimeBlowup;
    v.note = "bounded compute with saturating data: criterion reduces to p against 1";
    return v;
  }
  if (!(zeta > 1.0)) {
    throw Error(ErrorCode::AmbiguousFlags, "no parameter region applies: zeta <= 1 without capped power or logistic data");
  }
  if (p > 1.0) {
    v.region = Region::ASupercritical;
    v.conclusion = Conclusion::FiniteTimeBlowup;
    if (capital) v.bound = capital_lower(*capital, 0.0).T_K;
    v.note = "blow-up no later than T_K";
  } else {
    v.region = Region::ASubcritical;
    v.conclusion = Conclusion::Nonsingular;
    v.note = "possibly hyper-exponential but nonsingular";
  }
  return v;
}

}  // namespace rsicert::dynamics
