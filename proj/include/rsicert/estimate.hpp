#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rsicert/hac.hpp"
#include "rsicert/series.hpp"

namespace rsicert {

struct ElasticityEstimate {
  double t = 0.0;
  double value = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double window = 0.0;  ///< full window width, seconds
  double n_eff = 0.0;

  nlohmann::json to_json() const;
};

/// Estimation settings shared by the pipeline stages.
struct EstimationConfig {
  double window = 0.0;
  std::optional<Eigen::Index> lag;  ///< nullopt selects the automatic Bartlett lag
  double alpha = 0.05;
  int bootstrap_reps = 999;
  std::uint64_t seed = 0;
  double trim = 0.15;
  bool prewhiten = false;

  static EstimationConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

namespace estimate {

/// Newey-West standard errors of an OLS fit of some y on X with the given residuals.
Eigen::VectorXd newey_west_se(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals, Eigen::Index lag);

struct RollingElasticity {
  std::vector<ElasticityEstimate> estimates;
  std::vector<double> gaps;  ///< centers skipped because the window held I <= 0 or Idot <= 0
};

/// Kernel-weighted local slope of log Idot on log I around every sample time.
/// Windows need at least five samples; lag nullopt uses the automatic rule per window.
RollingElasticity rolling_elasticity(const TimeSeries& I, const TimeSeries& Idot, double window,
                                     std::optional<Eigen::Index> lag = std::nullopt, double alpha = 0.05,
                                     bool prewhiten = false);

/// Window minimising the generalized cross-validation score of the local
/// log-log fit over window = span / 2^k; ties go to the larger window.
double gcv_window(const TimeSeries& I, const TimeSeries& Idot, int levels = 6);

// --- regular-variation indices -------------------------------------------------

enum class IndexKind { Q, Xi, Rho };

struct RVIndices {
  IndexKind kind = IndexKind::Q;
  double hat = 0.0;
  double se = 0.0;
  double minus = 0.0;
  double plus = 0.0;
  std::vector<double> local;  ///< pointwise slopes (already mapped to rho for IndexKind::Rho)
  double fluctuation = 0.0;   ///< max |local - hat|
  double bootstrap_threshold = 0.0;
  bool rv_accepted = false;

  nlohmann::json to_json() const;
};

/// Local slopes of log y on log x over windows of width window_log in log x.
/// Q: y = Phi(I); Xi: y = eta(X); Rho: y = -l'(Z), reported as -1 - slope.
RVIndices rv_indices(const Eigen::VectorXd& x, const Eigen::VectorXd& y, IndexKind kind, double window_log = 1.151292546497,
                     int bootstrap_reps = 999, std::uint64_t seed = 0);

struct PotterResult {
  bool pass = true;
  double worst_excess = 0.0;  ///< max of |log(Li/Lj)| - eps |log(Ii/Ij)| - log c over checked pairs
  std::optional<std::pair<double, double>> worst_pair;  ///< (I_i, I_j) of the worst violation
  std::size_t pairs_checked = 0;
};

/// Potter-type bound over all pairs with I >= i_eps; pairs beyond max_pairs are
/// sampled uniformly with the given seed.
PotterResult potter_check(const Eigen::VectorXd& I, const Eigen::VectorXd& L, double eps, double c_eps,
                          double i_eps = 0.0, std::size_t max_pairs = 2'000'000, std::uint64_t seed = 0);

struct IvResult {
  double slope = 0.0;
  double se = 0.0;
  double ols_slope = 0.0;
  double first_stage_f = 0.0;
};

/// Cov(log Y, log Z) / Cov(log X, log Z) with a Newey-West SE. Weak first stage
/// (F < 10) raises WeakInstrument.
IvResult iv_slope(const TimeSeries& Y, const TimeSeries& X, const TimeSeries& Z,
                  std::optional<Eigen::Index> lag = std::nullopt);

/// Rauch-Tung-Striebel smoothed local linear trend of log values, exponentiated back.
TimeSeries kalman_trend(const TimeSeries& x, double process_var, double obs_var);

struct BreakSegmentation {
  std::vector<double> breakpoints;
  std::vector<std::pair<double, double>> segments;  ///< [t_start, t_end); the last end is the final time
  std::vector<std::pair<std::size_t, std::size_t>> index_ranges;  ///< [first, last) indices into the slope series
  double critical_value = 0.0;

  nlohmann::json to_json() const;
};

/// Asymptotic single-break sup-Wald critical value for a mean shift.
double sup_wald_critical_value(double trim, double alpha);

/// Sup-Wald mean-shift scan on the slope series with recursive binary segmentation.
BreakSegmentation sup_wald_breaks(const SlopeSeries& slopes, double trim = 0.15, double alpha = 0.05);

struct SampleRequirement {
  std::size_t m = 0;
  double unrounded = 0.0;
};

/// m >= (z_{1-alpha} + z_{1-beta})^2 sigma^2 / (delta^2 tau^2).
SampleRequirement required_samples(double sigma, double tau, double delta, double alpha, double beta);

struct PartialEstimate {
  std::string name;
  double value = 0.0;
  double se = 0.0;
  bool off_diagonal = true;
};

struct AntagonismReport {
  double viol = 0.0;
  bool viol_significant = false;
  double sigma_I_hat = 0.0;
  double sigma_x_hat = 0.0;
  bool residual_test_pass = false;
  bool cooperative_accepted = false;

  nlohmann::json to_json() const;
};

/// viol sums the magnitudes of negative off-diagonal partials; it counts as
/// statistically zero when no negative partial clears z_{1-alpha} se.
/// Sector residuals enter through their positive parts.
AntagonismReport antagonism_diagnostics(const std::vector<PartialEstimate>& partials,
                                        const Eigen::VectorXd& residuals_I, const Eigen::VectorXd& residuals_x,
                                        double a_hat, double theta, double alpha = 0.05);

/// Smallest rolling-window mean of an allocation series; a diagnostic for
/// persistent excitation, no pass threshold attached.
double excitation_infimum(const TimeSeries& u, double window);

}  // namespace estimate
}  // namespace rsicert
