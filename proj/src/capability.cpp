#include "rsicert/capability.hpp"

#include <cmath>
#include <numeric>

#include "rsicert/error.hpp"

namespace rsicert::capability {

void BenchmarkSpec::validate() const {
  if (tasks.empty()) throw Error(ErrorCode::InvalidBenchmark, "benchmark family has no tasks");
  double total = 0.0;
  for (const auto& task : tasks) {
    if (!(task.weight > 0.0)) throw Error(ErrorCode::InvalidBenchmark, "task '" + task.id + "' weight must be > 0");
    if (!(task.floor > 0.0)) throw Error(ErrorCode::InvalidBenchmark, "task '" + task.id + "' floor must be > 0");
    total += task.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidBenchmark, "task weights sum to " + std::to_string(total) + ", not 1");
  }
}

BenchmarkSpec BenchmarkSpec::from_json(const nlohmann::json& j) {
  BenchmarkSpec spec;
  try {
    for (const auto& jt : j.at("tasks")) {
      spec.tasks.push_back({jt.at("id").get<std::string>(), jt.at("weight").get<double>(), jt.at("floor").get<double>()});
    }
    spec.t_ref = j.at("t_ref").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("benchmark spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json BenchmarkSpec::to_json() const {
  nlohmann::json jt = nlohmann::json::array();
  for (const auto& task : tasks) jt.push_back({{"id", task.id}, {"weight", task.weight}, {"floor", task.floor}});
  return {{"tasks", std::move(jt)}, {"t_ref", t_ref}};
}

LossIndex loss_index(const std::map<std::string, TimeSeries>& losses, const BenchmarkSpec& spec) {
  spec.validate();
  const TimeSeries* grid = nullptr;
  Eigen::VectorXd g;
  std::vector<std::string> warnings;
  std::vector<std::string> versions;

  for (const auto& task : spec.tasks) {
    const auto it = losses.find(task.id);
    if (it == losses.end()) throw Error(ErrorCode::MissingTask, "no loss series for task '" + task.id + "'");
    const TimeSeries& L = it->second;
    if (grid == nullptr) {
      grid = &L;
      g = Eigen::VectorXd::Zero(L.size());
    } else if (!grid->same_grid(L)) {
      throw Error(ErrorCode::GridMismatch, "loss series for task '" + task.id + "' is on a different grid");
    }
    if ((L.values().array() <= 0.0).any()) {
      throw Error(ErrorCode::NonPositiveValue, "loss series for task '" + task.id + "' has a non-positive value");
    }
    const auto below = (L.values().array() < task.floor).count();
    if (below > 0) {
      warnings.push_back("task '" + task.id + "': loss below floor " + std::to_string(task.floor) + " at " +
                         std::to_string(below) + " sample(s)");
    }
    g += task.weight * (L.values().array() / task.floor).log().matrix();
    versions.push_back(L.snapshot_version());
  }
  std::string version;
  for (const auto& v : versions) version += (version.empty() ? "" : "+") + v;
  return {TimeSeries("I_tilde", "nat", grid->times(), -g, std::nullopt, version), std::move(warnings)};
}

Eigen::VectorXd finite_difference(const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
  const Eigen::Index n = t.size();
  if (n < 2) throw Error(ErrorCode::InsufficientWindow, "finite differences need at least two samples");
  Eigen::VectorXd d(n);
  d[0] = (y[1] - y[0]) / (t[1] - t[0]);
  d[n - 1] = (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    // Three-point derivative, exact for quadratics on non-uniform grids.
    const double h0 = t[i] - t[i - 1];
    const double h1 = t[i + 1] - t[i];
    d[i] = (-h1 / (h0 * (h0 + h1))) * y[i - 1] + ((h1 - h0) / (h0 * h1)) * y[i] + (h0 / (h1 * (h0 + h1))) * y[i + 1];
  }
  return d;
}

CapabilitySeries canonicalize(const TimeSeries& itilde, const BenchmarkSpec& spec) {
  if (!(spec.t_ref >= itilde.front_time() && spec.t_ref <= itilde.back_time())) {
    throw Error(ErrorCode::RefOutOfRange, "t_ref=" + std::to_string(spec.t_ref) + " outside the loss-series range");
  }
  const double offset = series::interpolate(itilde, spec.t_ref);
  Eigen::VectorXd I = itilde.values().array() - offset;
  Eigen::VectorXd Idot = finite_difference(itilde.times(), I);
  TimeSeries Is("I", "nat", itilde.times(), std::move(I), std::nullopt, itilde.snapshot_version());
  TimeSeries Idots("Idot", "nat/s", itilde.times(), std::move(Idot), std::nullopt, itilde.snapshot_version());
  return {std::move(Is), std::move(Idots), spec};
}

namespace {

std::optional<TimeSeries> subset(const TimeSeries& x, const std::vector<Eigen::Index>& keep, const Eigen::VectorXd& v,
                                 const std::string& name) {
  if (keep.empty()) return std::nullopt;
  Eigen::VectorXd t(static_cast<Eigen::Index>(keep.size())), vals(t.size());
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    t[k] = x.times()[keep[static_cast<std::size_t>(k)]];
    vals[k] = v[keep[static_cast<std::size_t>(k)]];
  }
  return TimeSeries(name, x.unit(), std::move(t), std::move(vals));
}

}  // namespace

InvarianceReport affine_invariance_check(const CapabilitySeries& cap, double a, double b, double window,
                                         double tolerance) {
  InvarianceReport report;
  if (!(a > 0.0)) {
    report.diagnostic = "scale a must be positive";
    return report;
  }
  if (!cap.I.same_grid(cap.Idot)) {
    report.diagnostic = "I and Idot grids differ";
    return report;
  }
  const Eigen::VectorXd I = cap.I.values();
  const Eigen::VectorXd J = (a * I.array() + b).matrix();
  const Eigen::VectorXd Idot = cap.Idot.values();
  const Eigen::VectorXd Jdot = a * Idot;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < I.size(); ++i) {
    if (I[i] > 0.0 && J[i] > 0.0 && Idot[i] > 0.0) keep.push_back(i);
  }
  const auto Is = subset(cap.I, keep, I, "I");
  if (!Is) {
    report.diagnostic = "no samples where both capability series are positive";
    return report;
  }
  try {
    const SlopeSeries base = series::elasticity(*subset(cap.Idot, keep, Idot, "Idot"), *Is, window);
    const SlopeSeries moved = series::elasticity(*subset(cap.Idot, keep, Jdot, "Jdot"), *subset(cap.I, keep, J, "J"),
                                                 window);
    for (std::size_t k = 0; k < base.size() && k < moved.size(); ++k) {
      report.max_abs_difference = std::max(report.max_abs_difference, std::abs(base[k].slope - moved[k].slope));
    }
    report.windows_compared = std::min(base.size(), moved.size());
  } catch (const Error& e) {
    report.diagnostic = e.what();
    return report;
  }
  if (report.windows_compared == 0) {
    report.diagnostic = "no window holds three positive samples";
    return report;
  }
  report.invariant = report.max_abs_difference <= tolerance;
  if (!report.invariant) {
    report.diagnostic = "elasticities differ by " + std::to_string(report.max_abs_difference);
  }
  return report;
}

}  // namespace rsicert::capability
