#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsicert/dynamics.hpp"
#include "rsicert/series.hpp"

namespace rsicert {

/// Raw resource exponents with diminishing-returns rate rho, minimax rate r and
/// observed loss-compute exponent chi_hat.
struct ExponentInputs {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double alpha_tilde = 0.0;
  double rho = 0.0;
  double r = 1.0;
  double chi_hat = 0.0;

  static ExponentInputs from_json(const nlohmann::json& j);
};

struct ExponentSet {
  ExponentInputs raw;
  double alpha_eff = 0.0;     ///< (1-rho) min{alpha, chi_hat}
  double beta_eff = 0.0;      ///< (1-rho) max{0, beta - r}
  double gamma_eff = 0.0;     ///< (1-rho) gamma
  double alpha_tilde_eff = 0.0;
  std::string alpha_cap;      ///< "alpha" or "chi_hat"
  std::string beta_cap;       ///< "beta-r" or "zero"

  nlohmann::json to_json() const;
};

/// An index with lower/upper envelopes and their standard errors.
struct Banded {
  double minus = 0.0;
  double plus = 0.0;
  double se_minus = 0.0;
  double se_plus = 0.0;

  static Banded point(double value, double se = 0.0) { return {value, value, se, se}; }
  static Banded from_json(const nlohmann::json& j);
};

struct Upsilons {
  Banded C;
  Banded D;
  Banded E;
};

struct PtotComponent {
  std::string name;
  double minus = 0.0;
  double plus = 0.0;
  double se_minus = 0.0;
  double se_plus = 0.0;
};

struct PtotEstimate {
  double minus = 0.0;
  double plus = 0.0;
  double se_minus = 0.0;
  double se_plus = 0.0;
  std::vector<PtotComponent> components;  ///< q, gamma*xi, alpha_eff*upsilon_C, beta_eff*upsilon_D, alpha_tilde_eff*upsilon_E

  nlohmann::json to_json() const;
  static PtotEstimate from_json(const nlohmann::json& j);
};

struct TestOutcome {
  bool reject = false;
  double margin = 0.0;  ///< signed distance of the test statistic past its threshold
  double z = 0.0;

  nlohmann::json to_json() const;
  static TestOutcome from_json(const nlohmann::json& j);
};

struct ChannelCeiling {
  double value = 0.0;
  double se = 0.0;
};

struct CeilingTest {
  bool reject = false;
  double lhs = 0.0;  ///< upsilon_C+ - z s
  double rhs = 0.0;  ///< smallest e+ + z s over channels
  double z = 0.0;
  std::string binding_channel;

  nlohmann::json to_json() const;
};

struct EnvelopeCheck {
  Eigen::VectorXd times;
  std::vector<bool> pass;
  Eigen::VectorXd capacity;        ///< Phi(I_k) phi_svc,k
  Eigen::VectorXd relative_slack;  ///< (capacity - (1-gamma) Idot) / capacity
  double pass_fraction = 0.0;
  std::optional<double> first_failure;  ///< time of the first failing sample

  nlohmann::json to_json() const;
};

struct SegmentEvidence {
  double t_start = 0.0;
  double t_end = 0.0;
  PtotEstimate ptot;
};

struct SegmentRecord {
  double t_start = 0.0;
  double t_end = 0.0;
  PtotEstimate ptot;
  TestOutcome superlinearity;  ///< p- - z se- > 1
  TestOutcome upper_band;      ///< reject means p+ + z se+ > 1, so the upper band fails
  std::optional<double> envelope_pass_fraction;
  std::optional<double> nonbinding_fraction;
  bool envelope_nonbinding = false;
  std::size_t samples = 0;
};

struct Margins {
  std::optional<double> ptot_margin;  ///< 1 - max over segments of (p+ + z se+)
  std::optional<double> manifold_distance;
  std::optional<double> wasserstein_margin;
};

enum class Verdict { NonsingularCertified, SingularAdmissible, Inconclusive };
std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

struct Certificate {
  Verdict verdict = Verdict::Inconclusive;
  std::vector<SegmentRecord> segments;
  std::optional<double> envelope_pass_fraction;
  bool osgood_divergent = false;
  Margins margins;
  std::optional<double> event_bound;
  std::vector<std::string> reasons;
  nlohmann::json config_echo = nlohmann::json::object();
  nlohmann::json data_snapshot_versions = nlohmann::json::object();
  nlohmann::json extras = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Certificate from_json(const nlohmann::json& j);
};

struct DecideOptions {
  double alpha = 0.05;
  double nonbinding_slack = 0.10;     ///< relative slack counted as nonbinding
  double nonbinding_coverage = 0.95;  ///< fraction of a segment that must be nonbinding
};

namespace certify {

ExponentSet effective_exponents(const ExponentInputs& raw);

/// Plug-in p_tot bands. The optional 5x5 covariances are of the component
/// contributions (minus and plus sides); without them components are independent.
PtotEstimate ptot(const Banded& q, const Banded& xi, double gamma, const ExponentSet& effs, const Upsilons& upsilons,
                  const std::optional<Eigen::MatrixXd>& cov_minus = std::nullopt,
                  const std::optional<Eigen::MatrixXd>& cov_plus = std::nullopt);

/// Rejects H0: p <= 1 when p_hat - z_{1-alpha} se > 1.
TestOutcome test_superlinearity(double p_hat, double se, double alpha);

/// Bonferroni test of upsilon_C+ against the io / mem / pow ceilings at z_{1-alpha/3}.
CeilingTest test_ceiling(double upsilon_c_plus, double se, const ChannelCeiling& io, const ChannelCeiling& mem,
                         const ChannelCeiling& pow, double alpha);

/// Pass at k iff (1-gamma) Idot_k <= Phi(I_k) phi_svc,k (1 + tol).
EnvelopeCheck envelope_check(const TimeSeries& Idot, const TimeSeries& phi_of_I, const TimeSeries& phi_svc,
                             double small_gain = 0.0, double tol = 1e-9);

Certificate decide(const std::vector<SegmentEvidence>& segments, const std::optional<EnvelopeCheck>& envelope,
                   const dynamics::OsgoodResult& osgood, const DecideOptions& options = {});

/// I(t)^{-delta} / (a0 delta).
double event_blowup_bound(double I_t, double delta, double a0);

struct DistributionMargin {
  double worst_case_ptot = 0.0;
  double threshold = 0.0;  ///< 1 - safety_delta
  bool certified = false;
};

/// p_tot + gamma L_xi delta_W + L_rho delta_W against 1 - safety_delta, compared with
/// an absolute tolerance of 1e-12.
DistributionMargin distribution_margin(double ptot_base, double gamma, double L_xi, double L_rho, double delta_W,
                                       double safety_delta);

/// |p_tot - 1| / grad_norm.
double manifold_distance(double ptot, double grad_norm);

struct GovernanceFlag {
  bool throttle = false;
  double margin = 0.0;  ///< (1 - delta) - p_tot+
};

/// Throttle when p_tot+ exceeds 1 - delta.
GovernanceFlag governance(double ptot_plus, double delta = 0.1);

}  // namespace certify
}  // namespace rsicert
