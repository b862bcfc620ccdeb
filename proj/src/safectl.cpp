#include "rsicert/safectl.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rsicert/error.hpp"

namespace rsicert {
namespace {

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void ControlConfig::validate() const {
  if (!(Delta > 0.0)) throw Error(ErrorCode::InvalidParams, "Delta must be positive");
  if (!(tau_bar >= 0.0)) throw Error(ErrorCode::InvalidParams, "tau_bar must be >= 0");
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidParams, "kappa must be positive");
  if (!(L_h >= 0.0) || !(eps_I >= 0.0)) throw Error(ErrorCode::InvalidParams, "L_h and eps_I must be >= 0");
  if (!(r_u >= 0.0)) throw Error(ErrorCode::InvalidParams, "rate limit must be >= 0");
  if (!(slack_weight > 0.0)) throw Error(ErrorCode::InvalidParams, "slack weight must be positive");
  if (!(slack_tol >= 0.0)) throw Error(ErrorCode::InvalidParams, "slack_tol must be >= 0");
  if (u_min.size() != u_max.size() || u_min.size() == 0) {
    throw Error(ErrorCode::InvalidParams, "u_min and u_max must have the same nonzero length");
  }
  if ((u_min.array() > u_max.array()).any()) throw Error(ErrorCode::InfeasibleBox, "u_min exceeds u_max");
  if (escalate_after < 1) throw Error(ErrorCode::InvalidParams, "escalate_after must be >= 1");
  if (!(theta >= 0.0 && theta < 1.0)) throw Error(ErrorCode::InvalidParams, "theta must lie in [0,1)");
}

ControlConfig ControlConfig::from_json(const nlohmann::json& j) {
  ControlConfig c;
  try {
    c.I_bar = j.at("I_bar").get<double>();
    c.kappa = j.at("kappa").get<double>();
    c.Delta = j.at("Delta").get<double>();
    c.tau_bar = j.value("tau_bar", 0.0);
    c.L_h = j.value("L_h", 0.0);
    c.eps_I = j.value("eps_I", 0.0);
    if (j.contains("r_u") && !j.at("r_u").is_null()) c.r_u = j.at("r_u").get<double>();
    if (j.contains("u_box")) {
      c.u_min = vector_from_json(j.at("u_box").at(0));
      c.u_max = vector_from_json(j.at("u_box").at(1));
    }
    c.slack_weight = j.value("slack_weight", 1e9);
    c.slack_tol = j.value("slack_tol", 1e-9);
    c.escalate_after = j.value("escalate_after", 3);
    c.theta = j.value("theta", 0.5);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("control config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json ControlConfig::to_json() const {
  return {{"I_bar", I_bar},
          {"kappa", kappa},
          {"Delta", Delta},
          {"tau_bar", tau_bar},
          {"L_h", L_h},
          {"eps_I", eps_I},
          {"r_u", std::isfinite(r_u) ? nlohmann::json(r_u) : nlohmann::json(nullptr)},
          {"u_box", {to_std(u_min), to_std(u_max)}},
          {"slack_weight", slack_weight},
          {"slack_tol", slack_tol},
          {"escalate_after", escalate_after},
          {"theta", theta}};
}

namespace safectl {

double barrier_residual(double I, const ControlConfig& config, double F_hat) {
  return F_hat - config.kappa * (I - config.I_bar);
}

double robust_residual(double base, double sigma_I, double sigma_x, double h_prime) {
  if (!(sigma_I >= 0.0) || !(sigma_x >= 0.0)) throw Error(ErrorCode::InvalidParams, "sigma terms must be >= 0");
  return base + std::abs(h_prime) * (sigma_I + sigma_x);
}

BarrierRow barrier_row(double I_hat, const dynamics::PhiSpec& phi, const Eigen::VectorXd& phi_hat,
                       const ControlConfig& config, double antagonistic) {
  BarrierRow row;
  row.a = phi(I_hat) * phi_hat;
  row.b = config.kappa * (config.I_bar - I_hat) - config.L_h * config.tau_bar - config.kappa * config.eps_I -
          antagonistic;
  return row;
}

QpResult qp_step(const Eigen::VectorXd& u_ref, const Eigen::VectorXd& u_prev, const BarrierRow& row,
                 const ControlConfig& config) {
  const Eigen::Index n = u_ref.size();
  if (u_prev.size() != n || row.a.size() != n || config.u_min.size() != n || config.u_max.size() != n) {
    throw Error(ErrorCode::InvalidParams, "QP vectors differ in length");
  }
  if (!(config.slack_weight > 0.0)) throw Error(ErrorCode::InvalidParams, "slack weight must be positive");
  const double reach = config.r_u * config.Delta;
  Eigen::VectorXd lo(n), hi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lo[i] = std::isfinite(reach) ? std::max(config.u_min[i], u_prev[i] - reach) : config.u_min[i];
    hi[i] = std::isfinite(reach) ? std::min(config.u_max[i], u_prev[i] + reach) : config.u_max[i];
    if (lo[i] > hi[i]) {
      throw Error(ErrorCode::InfeasibleBox, "box and rate limits do not intersect on channel " + std::to_string(i));
    }
  }
  const double inv2rho = 0.5 / config.slack_weight;
  auto u_of = [&](double lambda) {
    return (u_ref - lambda * row.a).cwiseMax(lo).cwiseMin(hi).eval();
  };
  auto g = [&](double lambda) { return row.a.dot(u_of(lambda)) - row.b - lambda * inv2rho; };

  QpResult out;
  if (g(0.0) <= 0.0) {
    out.u_star = u_of(0.0);
    return out;
  }
  std::vector<double> knots;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (row.a[i] == 0.0) continue;
    for (double bound : {lo[i], hi[i]}) {
      const double lambda = (u_ref[i] - bound) / row.a[i];
      if (lambda > 0.0) knots.push_back(lambda);
    }
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  // Locate the linear piece holding the root of g, then solve it in closed form.
  double left = 0.0;
  double right = std::numeric_limits<double>::infinity();
  for (double k : knots) {
    if (g(k) <= 0.0) {
      right = k;
      break;
    }
    left = k;
  }
  const double probe = std::isfinite(right) ? 0.5 * (left + right) : left + 1.0;
  const Eigen::VectorXd up = u_ref - probe * row.a;
  double numer = -row.b;
  double denom = inv2rho;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (up[i] < lo[i]) {
      numer += row.a[i] * lo[i];
    } else if (up[i] > hi[i]) {
      numer += row.a[i] * hi[i];
    } else {
      numer += row.a[i] * u_ref[i];
      denom += row.a[i] * row.a[i];
    }
  }
  double lambda = numer / denom;
  lambda = std::max(lambda, left);
  if (std::isfinite(right)) lambda = std::min(lambda, right);
  out.multiplier = lambda;
  out.u_star = u_of(lambda);
  out.slack = lambda * inv2rho;
  return out;
}

ObserverState observer_update(const ObserverState& state, double phi_svc_hat, const dynamics::PhiSpec& phi,
                              const std::optional<BenchmarkReading>& benchmark, const ControlConfig& config) {
  ObserverState next;
  double correction = 0.0;
  if (benchmark) {
    if (!(benchmark->confidence >= 0.0 && benchmark->confidence <= 1.0)) {
      throw Error(ErrorCode::InvalidParams, "confidence weight must lie in [0,1]");
    }
    correction = benchmark->confidence * (benchmark->value - state.I_hat);
    next.last_benchmark = benchmark;
  } else if (state.last_benchmark) {
    next.last_benchmark = state.last_benchmark;
    next.last_benchmark->age += config.Delta;
  }
  next.I_hat = state.I_hat + config.Delta * phi(state.I_hat) * phi_svc_hat + correction;
  if (!std::isfinite(next.I_hat)) throw Error(ErrorCode::InvalidParams, "observer state became non-finite");
  return next;
}

nlohmann::json ThrottleCertificate::to_json() const {
  return {{"phi_bar", phi_bar},
          {"osgood_divergent", osgood.divergent},
          {"exponential_rate", exponential_rate ? nlohmann::json(*exponential_rate) : nlohmann::json(nullptr)},
          {"note", note}};
}

ThrottleCertificate throttle_cap(const dynamics::PhiSpec& phi, double phi_bar) {
  if (!(phi_bar > 0.0)) throw Error(ErrorCode::InvalidParams, "phi_bar must be positive");
  ThrottleCertificate c;
  c.phi_bar = phi_bar;
  c.osgood = dynamics::osgood_classify(phi, phi.domain_floor());
  if (!c.osgood.divergent) {
    throw Error(ErrorCode::NoStaticCapPossible, "Phi is Osgood-convergent; no constant cap restores divergence");
  }
  if (const auto* p = std::get_if<dynamics::PowerPhi>(&phi.kind()); p != nullptr && p->p == 1.0) {
    c.exponential_rate = p->c * phi_bar;
    c.note = "linear Phi: closed loop grows at most like exp(" + std::to_string(*c.exponential_rate) + " t)";
  } else {
    c.note = "Osgood integral diverges under any constant cap";
  }
  return c;
}

std::string to_string(Action a) {
  switch (a) {
    case Action::Certify: return "certify";
    case Action::Escalate: return "escalate";
    case Action::Shutdown: return "shutdown";
  }
  return "certify";
}

nlohmann::json StepRecord::to_json() const {
  nlohmann::json margins{{"h", h}, {"barrier_budget", budget}};
  if (governance_margin) margins["governance"] = *governance_margin;
  return {{"k", k},         {"t", t},         {"I", I},           {"I_hat", I_hat}, {"u", to_std(u)},
          {"slack", slack}, {"action", to_string(action)}, {"margins", std::move(margins)}};
}

std::string SuperviseResult::to_jsonl() const {
  std::ostringstream os;
  for (const auto& r : log) os << r.to_json().dump() << '\n';
  return os.str();
}

PlantScenario PlantScenario::from_json(const nlohmann::json& j) {
  static const char* const kKeys[] = {"phi",     "I0",   "phi_svc", "u_ref",     "steps",          "antagonistic",
                                      "antagonistic_hat", "estimation_error", "latency", "seed", "ptot_plus",
                                      "governance_delta", "kind"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw Error(ErrorCode::ConfigError, "unknown plant scenario key '" + key + "'");
    }
  }
  PlantScenario s;
  try {
    s.phi = dynamics::PhiSpec::from_json(j.at("phi"));
    s.I0 = j.at("I0").get<double>();
    if (j.contains("phi_svc")) s.phi_svc = vector_from_json(j.at("phi_svc"));
    if (j.contains("u_ref")) s.u_ref = vector_from_json(j.at("u_ref"));
    s.steps = j.value("steps", std::size_t{100});
    s.antagonistic = j.value("antagonistic", 0.0);
    s.antagonistic_hat = j.value("antagonistic_hat", s.antagonistic);
    s.estimation_error = j.value("estimation_error", 0.0);
    s.latency = j.value("latency", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("ptot_plus")) s.ptot_plus = j.at("ptot_plus").get<double>();
    s.governance_delta = j.value("governance_delta", 0.1);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("plant scenario: ") + e.what());
  }
  return s;
}

SuperviseResult supervise(const PlantScenario& plant, const ControlConfig& config) {
  config.validate();
  if (plant.phi_svc.size() != config.u_min.size() || plant.u_ref.size() != config.u_min.size()) {
    throw Error(ErrorCode::InvalidParams, "scenario channels differ from the control box");
  }
  if (!(plant.latency >= 0.0 && plant.latency <= config.tau_bar + 1e-15 && plant.latency < config.Delta)) {
    throw Error(ErrorCode::InvalidParams, "latency must lie in [0, min(tau_bar, Delta))");
  }
  SuperviseResult result;
  std::mt19937_64 rng(plant.seed);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);

  double I = plant.I0;
  Eigen::VectorXd u_prev = plant.u_ref.cwiseMax(config.u_min).cwiseMin(config.u_max);
  int positive_slack_run = 0;
  const double blowup_threshold = 1e12 * std::max(1.0, config.I_bar);

  // Advances the true plant over a hold interval; returns false on blow-up.
  auto advance = [&](const Eigen::VectorXd& u, double duration) {
    if (duration <= 0.0) return true;
    const double gain = plant.phi_svc.dot(u);
    const dynamics::Rhs rhs = [&](double, double x) { return plant.phi(x) * gain + plant.antagonistic; };
    if (rhs(0.0, I) == 0.0) return true;
    const auto r = dynamics::integrate(rhs, I, duration, std::max(blowup_threshold, 2.0 * std::abs(I) + 1.0));
    I = r.I_end;
    return r.outcome == dynamics::Outcome::Completed;
  };

  for (std::size_t k = 0; k <= plant.steps; ++k) {
    StepRecord rec;
    rec.k = k;
    rec.t = static_cast<double>(k) * config.Delta;
    rec.I = I;
    rec.h = I - config.I_bar;
    rec.I_hat = I + plant.estimation_error * noise(rng);
    result.max_overshoot = std::max(result.max_overshoot, rec.h);
    if (plant.ptot_plus) rec.governance_margin = (1.0 - plant.governance_delta) - *plant.ptot_plus;
    if (k == plant.steps) {
      rec.u = u_prev;
      rec.action = Action::Certify;
      result.log.push_back(std::move(rec));
      result.final_status = "completed";
      break;
    }

    const double a_hat = plant.phi(rec.I_hat) * plant.phi_svc.dot(plant.u_ref);
    if (plant.antagonistic > config.theta * a_hat) {
      rec.u = config.u_min;
      rec.action = Action::Shutdown;
      result.log.push_back(std::move(rec));
      result.final_status = "shutdown";
      break;
    }
    const BarrierRow row = barrier_row(rec.I_hat, plant.phi, plant.phi_svc, config, plant.antagonistic_hat);
    const QpResult qp = qp_step(plant.u_ref, u_prev, row, config);
    rec.u = qp.u_star;
    rec.slack = qp.slack;
    rec.budget = row.b - row.a.dot(qp.u_star);
    positive_slack_run = qp.slack > config.slack_tol ? positive_slack_run + 1 : 0;
    rec.action = positive_slack_run >= config.escalate_after ? Action::Escalate : Action::Certify;
    result.log.push_back(rec);

    if (!advance(u_prev, plant.latency) || !advance(qp.u_star, config.Delta - plant.latency)) {
      result.final_status = "blowup";
      result.max_overshoot = std::numeric_limits<double>::infinity();
      break;
    }
    u_prev = qp.u_star;
  }
  return result;
}

}  // namespace safectl
}  // namespace rsicert
