#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rsicert/series.hpp"

namespace rsicert::dynamics {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Below this distance from 1 the closed forms switch to their exponential limit.
inline constexpr double kUnitExponentTol = 1e-9;

/// c * s^p
struct PowerPhi {
  double p = 1.0;
  double c = 1.0;
};
/// c * s^p * log(s); needs a domain floor above 1.
struct PowerLogPhi {
  double p = 1.0;
  double c = 1.0;
};
/// Log-log linear interpolation between knots; beyond the last knot the
/// exponent fitted on the last decade is extrapolated.
struct TabulatedPhi {
  Eigen::VectorXd I;
  Eigen::VectorXd phi;
};

/// Capability feedback envelope Phi(I), positive and nondecreasing on
/// [domain_floor, inf). Below the floor Phi is held at Phi(domain_floor).
class PhiSpec {
 public:
  using Kind = std::variant<PowerPhi, PowerLogPhi, TabulatedPhi>;

  PhiSpec(Kind kind, double domain_floor);
  static PhiSpec power(double p, double c = 1.0, double domain_floor = 1.0);
  static PhiSpec power_log(double p, double c = 1.0, double domain_floor = 2.0);
  static PhiSpec tabulated(Eigen::VectorXd I, Eigen::VectorXd phi);

  double operator()(double s) const;
  const Kind& kind() const noexcept { return kind_; }
  double domain_floor() const noexcept { return floor_; }
  /// Asymptotic log-log exponent: p for the power kinds, the fitted last-decade
  /// exponent for tabulated envelopes.
  double tail_exponent() const;
  /// Same envelope multiplied by a positive constant.
  PhiSpec scaled(double factor) const;

  static PhiSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

 private:
  Kind kind_;
  double floor_;
  double tail_exponent_ = 0.0;
};

struct OsgoodResult {
  bool divergent = false;
  double value = kInf;  ///< integral of ds/Phi(s) from I0 to infinity
};

/// Classifies the Osgood integral, in closed form for the power kinds and by
/// exact piecewise power-law integration plus an analytic tail for tables.
OsgoodResult osgood_classify(const PhiSpec& phi, double I0);

/// Blow-up time bound under Idot >= a0 I^p for I >= I1.
struct BlowupBound {
  double value = 0.0;
  /// True when I0 < I1: the bound then counts from the first time I reaches I1.
  bool from_threshold = false;
};
BlowupBound blowup_bound(double I0, double I1, double a0, double p);

/// Solution of Idot = a0 I^p: [I0^{1-p} - a0 (p-1) t]^{-1/(p-1)}.
double powerlaw_solution(double I0, double a0, double p, double t);
/// Blow-up time I0^{1-p} / (a0 (p-1)); infinite for p <= 1.
double powerlaw_blowup_time(double I0, double a0, double p);

// --- numerical integration -------------------------------------------------

using Rhs = std::function<double(double t, double I)>;

/// a(t) * Phi(I) (+ chi(t, I) when given).
Rhs envelope_rhs(std::function<double(double)> a, PhiSpec phi,
                 std::function<double(double, double)> chi = nullptr);

struct IntegrateOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-11;
  double initial_step = 1e-4;
  double min_step = 1e-15;
  std::size_t max_steps = 5'000'000;
};

enum class Outcome { Completed, BlowupDetected };

struct IntegrationResult {
  Outcome outcome = Outcome::Completed;
  double t_end = 0.0;  ///< horizon when completed, detected crossing time t* otherwise
  double I_end = 0.0;
  TimeSeries trajectory;
  std::size_t accepted_steps = 0;
};

/// Adaptive Dormand-Prince 5(4) with step rejection. Blow-up is declared when
/// I crosses the threshold; the crossing time is located on the dense output.
IntegrationResult integrate(const Rhs& rhs, double I0, double horizon, double threshold,
                            const IntegrateOptions& options = {});

// --- discrete recursion ----------------------------------------------------

struct DiscreteRsiResult {
  /// Number of iterates I_0..I_n generated until I_n >= threshold.
  std::size_t steps_to_threshold = 0;
  /// n, the index of the first iterate at or above the threshold.
  std::size_t index_at_threshold = 0;
  /// ceil(I0^{1-p} / (a (p-1))).
  std::size_t published_step_bound = 0;
  bool bound_respected = false;
  bool discrepancy = false;
  std::vector<double> sequence;
};

/// Simulates I_{n+1} = I_n + a I_n^p until the threshold is reached.
DiscreteRsiResult discrete_rsi(double I0, double a, double p, double threshold);

/// log I_n for n = 0..steps, computed in the log domain so the doubly
/// exponential growth never overflows.
std::vector<double> discrete_log_trajectory(double I0, double a, double p, std::size_t steps);

/// Least-squares slope of log(log I_n) against n over the last `tail` iterates.
double loglog_growth_slope(const std::vector<double>& log_I, std::size_t tail);

struct SublinearCheck {
  bool pass = true;
  std::optional<std::size_t> first_failure;  ///< n with I_{n+1} - I_n > A (1 + I_n)^p
};
SublinearCheck discrete_sublinear_check(const std::vector<double>& sequence, double A, double p);

// --- capital / data closed forms ---------------------------------------------

struct CapitalParams {
  double K0 = 1.0;
  double r = 1.0;
  double zeta = 1.0;
  double delta = 0.0;

  void validate() const;
  static CapitalParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

enum class CapitalRegime { FiniteTime, Exponential, Polynomial };
std::string to_string(CapitalRegime regime);

struct CapitalLower {
  double K_lower = 0.0;
  double T_K = kInf;
  CapitalRegime regime = CapitalRegime::FiniteTime;
};

/// Lower solution of Kdot >= (r/2) K^zeta. For zeta > 1 this is
/// (K0^{1-zeta} - (r/2)(zeta-1) t)^{-1/(zeta-1)} with T_K = 2 K0^{1-zeta} / (r (zeta-1));
/// zeta <= 1 yields the labeled exponential or polynomial comparison instead.
CapitalLower capital_lower(const CapitalParams& params, double t);

/// D_max / (1 + nu e^{-rate t}).
double logistic_data(double D_max, double nu, double rate, double t);

// --- robustness / regions ------------------------------------------------------

enum class RobustVerdict { RobustNonsingular, RobustBlowup, Indeterminate };
std::string to_string(RobustVerdict v);

struct WorstCaseTimes {
  double T_min = kInf;  ///< from the fastest envelope a_max
  double T_max = kInf;  ///< from the slowest envelope a_min
  RobustVerdict verdict = RobustVerdict::Indeterminate;
};

WorstCaseTimes worst_case_times(const PhiSpec& a_min, const PhiSpec& a_max, double I0);

enum class Region { ASupercritical, ASubcritical, BCapped, CLogistic };
enum class Conclusion { FiniteTimeBlowup, Nonsingular, Conditional };
std::string to_string(Region r);
std::string to_string(Conclusion c);

struct RegionVerdict {
  Region region = Region::ASubcritical;
  Conclusion conclusion = Conclusion::Conditional;
  std::optional<double> bound;  ///< T_K for region A-supercritical when capital parameters are known
  std::string note;
};

struct RegionFlags {
  bool capped_power = false;
  bool logistic_data = false;
  bool baseline_effort_floor = false;
};

RegionVerdict classify_region(double zeta, double p, const RegionFlags& flags,
                              const std::optional<CapitalParams>& capital = std::nullopt);

}  // namespace rsicert::dynamics
