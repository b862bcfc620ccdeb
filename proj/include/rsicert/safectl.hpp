#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsicert/dynamics.hpp"
#include "rsicert/series.hpp"

namespace rsicert {

struct ControlConfig {
  double I_bar = 1.0;     ///< capability ceiling, nat
  double kappa = 1.0;     ///< linear class-K gain
  double Delta = 0.01;    ///< sample period, s
  double tau_bar = 0.0;   ///< worst-case actuation latency, s
  double L_h = 0.0;       ///< Lipschitz bound on h'(I) F over the operating set
  double eps_I = 0.0;     ///< certified estimation error bound, nat
  double r_u = std::numeric_limits<double>::infinity();  ///< rate limit per channel, 1/s
  Eigen::VectorXd u_min = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd u_max = Eigen::VectorXd::Ones(1);
  double slack_weight = 1e9;
  double slack_tol = 1e-9;  ///< slack at or below this counts as zero for escalation
  int escalate_after = 3;  ///< consecutive positive-slack samples before escalation
  double theta = 0.5;      ///< antagonistic budget as a fraction of a(I)

  void validate() const;
  static ControlConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct BenchmarkReading {
  double value = 0.0;       ///< benchmark-derived capability, nat
  double age = 0.0;         ///< s
  double confidence = 0.0;  ///< K_k in [0,1]
};

struct ObserverState {
  double I_hat = 0.0;
  std::optional<BenchmarkReading> last_benchmark;
};

namespace safectl {

/// F_hat - kappa (I - I_bar), the continuous-time barrier inequality as written.
/// Positive values below the ceiling are informational only.
double barrier_residual(double I, const ControlConfig& config, double F_hat);

/// base + |h'| (sigma_I + sigma_x).
double robust_residual(double base, double sigma_I, double sigma_x, double h_prime = 1.0);

/// Linear barrier row a.u <= b (+ slack).
struct BarrierRow {
  Eigen::VectorXd a;
  double b = 0.0;
};

/// Sampled-data row for the QP: Phi(I_hat) phi_hat.u + L_h tau_bar + kappa eps_I + sigma
/// <= kappa (I_bar - I_hat).
BarrierRow barrier_row(double I_hat, const dynamics::PhiSpec& phi, const Eigen::VectorXd& phi_hat,
                       const ControlConfig& config, double antagonistic = 0.0);

struct QpResult {
  Eigen::VectorXd u_star;
  double slack = 0.0;
  double multiplier = 0.0;  ///< KKT multiplier of the barrier row
};

/// Exact minimiser of 1/2 |u - u_ref|^2 + rho zeta^2 s.t. a.u <= b + zeta, zeta >= 0,
/// box and rate limits, found by walking the breakpoints of the piecewise-linear dual.
QpResult qp_step(const Eigen::VectorXd& u_ref, const Eigen::VectorXd& u_prev, const BarrierRow& row,
                 const ControlConfig& config);

/// I_hat + Delta Phi(I_hat) phi_svc_hat + K (I_tilde - I_hat); K = 0 without a benchmark.
ObserverState observer_update(const ObserverState& state, double phi_svc_hat, const dynamics::PhiSpec& phi,
                              const std::optional<BenchmarkReading>& benchmark, const ControlConfig& config);

struct ThrottleCertificate {
  double phi_bar = 0.0;
  dynamics::OsgoodResult osgood;
  std::optional<double> exponential_rate;  ///< growth rate bound when Phi is linear
  std::string note;

  nlohmann::json to_json() const;
};

/// Static cap phi_bar certified by Osgood divergence of Phi; NoStaticCapPossible otherwise.
ThrottleCertificate throttle_cap(const dynamics::PhiSpec& phi, double phi_bar);

struct PlantScenario {
  dynamics::PhiSpec phi = dynamics::PhiSpec::power(1.0);
  double I0 = 1.0;
  Eigen::VectorXd phi_svc = Eigen::VectorXd::Ones(1);  ///< per-channel service gain
  Eigen::VectorXd u_ref = Eigen::VectorXd::Ones(1);
  std::size_t steps = 100;
  double antagonistic = 0.0;      ///< residual rate added to the plant, nat/s
  double antagonistic_hat = 0.0;  ///< budget the controller accounts for
  double estimation_error = 0.0;  ///< |I_hat - I| is drawn uniformly up to this bound
  double latency = 0.0;           ///< realised actuation delay, s
  std::uint64_t seed = 0;
  std::optional<double> ptot_plus;
  double governance_delta = 0.1;

  static PlantScenario from_json(const nlohmann::json& j);
};

enum class Action { Certify, Escalate, Shutdown };
std::string to_string(Action a);

struct StepRecord {
  std::size_t k = 0;
  double t = 0.0;
  double I = 0.0;
  double I_hat = 0.0;
  Eigen::VectorXd u;
  double slack = 0.0;
  Action action = Action::Certify;
  double h = 0.0;        ///< I - I_bar
  double budget = 0.0;   ///< b - a.u of the barrier row
  std::optional<double> governance_margin;

  nlohmann::json to_json() const;
};

struct SuperviseResult {
  std::vector<StepRecord> log;
  std::string final_status;  ///< "completed", "shutdown" or "blowup"
  double max_overshoot = 0.0;  ///< max over samples of (I - I_bar)+

  /// One JSON object per line.
  std::string to_jsonl() const;
};

/// Closed-loop simulation of Idot = Phi(I) phi_svc.u + antagonistic with a
/// zero-order hold, latency and noisy state estimates.
SuperviseResult supervise(const PlantScenario& plant, const ControlConfig& config);

}  // namespace safectl
}  // namespace rsicert
