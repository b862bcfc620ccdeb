#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsicert/series.hpp"

namespace rsicert::capability {

struct BenchmarkTask {
  std::string id;
  double weight = 0.0;  ///< w_tau > 0
  double floor = 0.0;   ///< irreducible loss L*_tau > 0
};

/// Benchmark family with normalized weights and a reference time.
struct BenchmarkSpec {
  std::vector<BenchmarkTask> tasks;
  double t_ref = 0.0;

  /// Throws InvalidBenchmark unless weights are positive and sum to 1 within
  /// 1e-12 and floors are positive.
  void validate() const;

  static BenchmarkSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct LossIndex {
  TimeSeries itilde;                  ///< -sum_tau w_tau log(L_tau / L*_tau), in nat
  std::vector<std::string> warnings;  ///< one per task with samples where L_tau < L*_tau
};

/// Canonical capability I_can (aggregated nats) and its rate.
struct CapabilitySeries {
  TimeSeries I;
  TimeSeries Idot;
  BenchmarkSpec spec;
};

LossIndex loss_index(const std::map<std::string, TimeSeries>& losses, const BenchmarkSpec& spec);

/// I_can(t) = Itilde(t) - Itilde(t_ref); Idot by central differences on the
/// interior and one-sided differences at both ends.
CapabilitySeries canonicalize(const TimeSeries& itilde, const BenchmarkSpec& spec);

/// Finite-difference derivative on a (possibly non-uniform) grid.
Eigen::VectorXd finite_difference(const Eigen::VectorXd& t, const Eigen::VectorXd& y);

struct InvarianceReport {
  bool invariant = false;
  double max_abs_difference = 0.0;
  std::size_t windows_compared = 0;
  std::string diagnostic;
};

/// Compares the rolling elasticity of Idot on I with that of a*Idot on a*I + b,
/// over windows where both capability series are strictly positive.
InvarianceReport affine_invariance_check(const CapabilitySeries& cap, double a, double b, double window,
                                         double tolerance = 1e-6);

}  // namespace rsicert::capability
