#include "rsicert/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <random>

#include "rsicert/error.hpp"
#include "rsicert/stats.hpp"

namespace rsicert {

nlohmann::json ElasticityEstimate::to_json() const {
  return {{"t", t}, {"value", value}, {"se", se}, {"ci", {ci_lo, ci_hi}}, {"window", window}, {"n_eff", n_eff}};
}

EstimationConfig EstimationConfig::from_json(const nlohmann::json& j) {
  EstimationConfig c;
  try {
    c.window = j.value("window", 0.0);
    if (j.contains("lag")) {
      const auto& lag = j.at("lag");
      if (lag.is_string()) {
        if (lag.get<std::string>() != "auto") throw Error(ErrorCode::ConfigError, "lag must be \"auto\" or an integer");
      } else {
        c.lag = lag.get<Eigen::Index>();
      }
    }
    c.alpha = j.value("alpha", 0.05);
    c.bootstrap_reps = j.value("bootstrap_reps", 999);
    c.seed = j.value("seed", std::uint64_t{0});
    c.trim = j.value("trim", 0.15);
    c.prewhiten = j.value("prewhiten", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("estimation config: ") + e.what());
  }
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw Error(ErrorCode::ConfigError, "alpha must lie in (0,1)");
  if (c.lag && *c.lag < 0) throw Error(ErrorCode::ConfigError, "lag must be >= 0");
  return c;
}

nlohmann::json EstimationConfig::to_json() const {
  nlohmann::json j{{"window", window}, {"alpha", alpha}, {"bootstrap_reps", bootstrap_reps},
                   {"seed", seed},     {"trim", trim},   {"prewhiten", prewhiten}};
  j["lag"] = lag ? nlohmann::json(*lag) : nlohmann::json("auto");
  return j;
}

namespace estimate {
namespace {

/// Bartlett long-run variance of a scalar score sequence.
double bartlett_lrv(const Eigen::VectorXd& v, Eigen::Index lag) {
  const Eigen::Index n = v.size();
  lag = std::min<Eigen::Index>(lag, n - 1);
  double s = v.squaredNorm();
  for (Eigen::Index l = 1; l <= lag; ++l) {
    const double w = 1.0 - static_cast<double>(l) / static_cast<double>(lag + 1);
    s += 2.0 * w * v.tail(n - l).dot(v.head(n - l));
  }
  return std::max(0.0, s);
}

/// Long-run variance with optional AR(1) prewhitening and recoloring.
double score_lrv(const Eigen::VectorXd& v, Eigen::Index lag, bool prewhiten) {
  if (!prewhiten || v.size() < 3) return bartlett_lrv(v, lag);
  const Eigen::Index n = v.size();
  const double denom = v.head(n - 1).squaredNorm();
  double rho = denom > 0.0 ? v.tail(n - 1).dot(v.head(n - 1)) / denom : 0.0;
  rho = std::clamp(rho, -0.97, 0.97);
  const Eigen::VectorXd e = v.tail(n - 1) - rho * v.head(n - 1);
  return bartlett_lrv(e, lag) * static_cast<double>(n) / static_cast<double>(n - 1) / ((1.0 - rho) * (1.0 - rho));
}

struct LocalFit {
  double slope = 0.0;
  double intercept = 0.0;
  double se = 0.0;
  double n_eff = 0.0;
};

/// Weighted line fit of y on x over rows with w > 0; se from the slope score LRV.
LocalFit local_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                   std::optional<Eigen::Index> lag, bool prewhiten) {
  const LineFit fit = fit_weighted_line(x, y, w, 0);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) rows.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  const double wsum = w.sum();
  const double xbar = w.dot(x) / wsum;
  Eigen::VectorXd score(m);
  double sxx = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(k)];
    const double dx = x[i] - xbar;
    score[k] = w[i] * dx * fit.residuals[k];
    sxx += w[i] * dx * dx;
  }
  const Eigen::Index use_lag = lag ? *lag : newey_west_auto_lag(m);
  LocalFit out;
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.se = std::sqrt(score_lrv(score, use_lag, prewhiten)) / sxx;
  out.n_eff = fit.n_eff;
  return out;
}

Eigen::Index count_positive(const Eigen::VectorXd& w) { return (w.array() > 0.0).count(); }

}  // namespace

Eigen::VectorXd newey_west_se(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals, Eigen::Index lag) {
  return rsicert::newey_west_se(X, residuals, lag);
}

RollingElasticity rolling_elasticity(const TimeSeries& I, const TimeSeries& Idot, double window,
                                     std::optional<Eigen::Index> lag, double alpha, bool prewhiten) {
  if (!I.same_grid(Idot)) throw Error(ErrorCode::GridMismatch, "I and Idot grids differ");
  if (!(window > 0.0)) throw Error(ErrorCode::InvalidParams, "window must be positive");
  const double h = 0.5 * window;
  const double z = normal_quantile(1.0 - 0.5 * alpha);
  const Eigen::VectorXd& iv = I.values();
  const Eigen::VectorXd& dv = Idot.values();
  const Eigen::VectorXd quality = Idot.weights().cwiseProduct(I.weights());
  Eigen::VectorXd logI(iv.size()), logD(dv.size());
  for (Eigen::Index i = 0; i < iv.size(); ++i) {
    logI[i] = iv[i] > 0.0 ? std::log(iv[i]) : 0.0;
    logD[i] = dv[i] > 0.0 ? std::log(dv[i]) : 0.0;
  }

  RollingElasticity out;
  for (Eigen::Index c = 0; c < I.size(); ++c) {
    const double tc = I.times()[c];
    const Eigen::VectorXd w = series::kernel_weights(I, tc, h).cwiseProduct(quality);
    if (count_positive(w) < 5) continue;
    bool usable = true;
    for (Eigen::Index i = 0; i < w.size() && usable; ++i) {
      if (w[i] > 0.0 && !(iv[i] > 0.0 && dv[i] > 0.0)) usable = false;
    }
    if (usable) {
      const double wsum = w.sum();
      const double mean = w.dot(logI) / wsum;
      const double var = (w.array() * (logI.array() - mean).square()).sum() / wsum;
      usable = var >= series::kDegenerateVarianceTol;
    }
    if (!usable) {
      out.gaps.push_back(tc);
      continue;
    }
    const LocalFit fit = local_fit(logI, logD, w, lag, prewhiten);
    out.estimates.push_back({tc, fit.slope, fit.se, fit.slope - z * fit.se, fit.slope + z * fit.se, window, fit.n_eff});
  }
  if (out.estimates.empty()) {
    throw Error(ErrorCode::AllWindowsDegenerate, "no window holds five samples with I > 0 and Idot > 0");
  }
  return out;
}

double gcv_window(const TimeSeries& I, const TimeSeries& Idot, int levels) {
  if (!I.same_grid(Idot)) throw Error(ErrorCode::GridMismatch, "I and Idot grids differ");
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < I.size(); ++i) {
    if (I.values()[i] > 0.0 && Idot.values()[i] > 0.0) rows.push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n < 5) throw Error(ErrorCode::AllWindowsDegenerate, "fewer than five samples with I > 0 and Idot > 0");
  Eigen::VectorXd t(n), x(n), y(n), q(n);
  const Eigen::VectorXd quality = Idot.weights().cwiseProduct(I.weights());
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(k)];
    t[k] = I.times()[i];
    x[k] = std::log(I.values()[i]);
    y[k] = std::log(Idot.values()[i]);
    q[k] = quality[i];
  }
  const double span = t[n - 1] - t[0];
  double best_window = 0.0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= levels; ++k) {
    const double window = span / std::pow(2.0, k);
    const double h = 0.5 * window;
    double rss = 0.0;
    double trace = 0.0;
    bool ok = true;
    for (Eigen::Index c = 0; c < n && ok; ++c) {
      Eigen::VectorXd w(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (t[i] - t[c]) / h;
        w[i] = std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) * q[i] : 0.0;
      }
      if (count_positive(w) < 5) {
        ok = false;
        break;
      }
      const double wsum = w.sum();
      const double xbar = w.dot(x) / wsum;
      const double sxx = (w.array() * (x.array() - xbar).square()).sum();
      if (!(sxx > 0.0)) {
        ok = false;
        break;
      }
      const double ybar = w.dot(y) / wsum;
      const double slope = (w.array() * (x.array() - xbar) * (y.array() - ybar)).sum() / sxx;
      const double fitted = ybar + slope * (x[c] - xbar);
      rss += (y[c] - fitted) * (y[c] - fitted);
      trace += w[c] / wsum + w[c] * (x[c] - xbar) * (x[c] - xbar) / sxx;
    }
    if (!ok || !(trace < static_cast<double>(n))) continue;
    const double denom = static_cast<double>(n) - trace;
    const double score = static_cast<double>(n) * rss / (denom * denom);
    // Strict improvement beyond rounding is required, so ties keep the larger window.
    if (score < best_score * (1.0 - 1e-9) - 1e-300) {
      best_score = score;
      best_window = window;
    }
  }
  if (best_window == 0.0) throw Error(ErrorCode::InsufficientWindow, "no dyadic window holds five samples everywhere");
  return best_window;
}

// --- regular variation ------------------------------------------------------------

nlohmann::json RVIndices::to_json() const {
  const char* name = kind == IndexKind::Q ? "q" : kind == IndexKind::Xi ? "xi" : "rho";
  return {{"index", name},         {"hat", hat},
          {"se", se},              {"minus", minus},
          {"plus", plus},          {"fluctuation", fluctuation},
          {"bootstrap_threshold", bootstrap_threshold}, {"rv_accepted", rv_accepted}};
}

namespace {

struct LocalSlopes {
  std::vector<double> slope;
  std::vector<double> n_eff;
  Eigen::VectorXd residual;  ///< residual of each point in its own window
};

LocalSlopes local_slopes(const Eigen::VectorXd& lx, const Eigen::VectorXd& ly, double half) {
  const Eigen::Index n = lx.size();
  LocalSlopes out;
  out.residual = Eigen::VectorXd::Zero(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = (lx[i] - lx[c]) / half;
      w[i] = std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    }
    if (count_positive(w) < 5) continue;
    const double wsum = w.sum();
    const double xbar = w.dot(lx) / wsum;
    const double ybar = w.dot(ly) / wsum;
    const double sxx = (w.array() * (lx.array() - xbar).square()).sum();
    if (!(sxx > 0.0)) continue;
    const double slope = (w.array() * (lx.array() - xbar) * (ly.array() - ybar)).sum() / sxx;
    out.slope.push_back(slope);
    out.n_eff.push_back(wsum * wsum / w.squaredNorm());
    out.residual[c] = ly[c] - ybar - slope * (lx[c] - xbar);
  }
  return out;
}

double weighted_mean(const std::vector<double>& v, const std::vector<double>& w) {
  double s = 0.0, ws = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += w[i] * v[i];
    ws += w[i];
  }
  return s / ws;
}

double max_deviation(const std::vector<double>& v, double centre) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x - centre));
  return m;
}

}  // namespace

RVIndices rv_indices(const Eigen::VectorXd& x, const Eigen::VectorXd& y, IndexKind kind, double window_log,
                     int bootstrap_reps, std::uint64_t seed) {
  if (x.size() != y.size()) throw Error(ErrorCode::GridMismatch, "abscissa and ordinate differ in length");
  if (x.size() < 5) throw Error(ErrorCode::InsufficientRange, "fewer than five samples");
  if ((x.array() <= 0.0).any() || (y.array() <= 0.0).any()) {
    throw Error(ErrorCode::NonPositiveValue, "regular-variation samples must be positive");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
  Eigen::VectorXd lx(x.size()), ly(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    lx[k] = std::log(x[order[static_cast<std::size_t>(k)]]);
    ly[k] = std::log(y[order[static_cast<std::size_t>(k)]]);
  }
  if (lx[lx.size() - 1] - lx[0] < std::log(10.0) * (1.0 - 1e-12)) {
    throw Error(ErrorCode::InsufficientRange, "abscissa spans less than one decade");
  }
  const double half = 0.5 * window_log;
  const LocalSlopes base = local_slopes(lx, ly, half);
  if (base.slope.empty()) throw Error(ErrorCode::InsufficientRange, "no window holds five samples");

  const LineFit global = fit_weighted_line(lx, ly, Eigen::VectorXd::Ones(lx.size()), 0);
  const Eigen::VectorXd fitted = global.intercept + global.slope * lx.array();

  RVIndices out;
  out.kind = kind;
  out.hat = weighted_mean(base.slope, base.n_eff);
  out.se = global.se_slope;
  out.fluctuation = max_deviation(base.slope, out.hat);
  out.local = base.slope;
  out.minus = *std::min_element(base.slope.begin(), base.slope.end());
  out.plus = *std::max_element(base.slope.begin(), base.slope.end());
  out.hat = std::clamp(out.hat, out.minus, out.plus);

  // Wild bootstrap under a constant index: global line plus Rademacher-flipped local residuals.
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(std::max(0, bootstrap_reps)));
  for (int r = 0; r < bootstrap_reps; ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Eigen::VectorXd ystar(ly.size());
    for (Eigen::Index i = 0; i < ly.size(); ++i) {
      const double sign = (rng() & 1U) != 0U ? 1.0 : -1.0;
      ystar[i] = fitted[i] + sign * base.residual[i];
    }
    const LocalSlopes boot = local_slopes(lx, ystar, half);
    stats.push_back(max_deviation(boot.slope, weighted_mean(boot.slope, boot.n_eff)));
  }
  if (!stats.empty()) {
    std::sort(stats.begin(), stats.end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(stats.size()))) - 1;
    out.bootstrap_threshold = stats[std::min(idx, stats.size() - 1)];
  }
  out.rv_accepted = out.fluctuation <= out.bootstrap_threshold + 1e-9;

  if (kind == IndexKind::Rho) {
    for (double& s : out.local) s = -1.0 - s;
    out.hat = -1.0 - out.hat;
    const double lo = -1.0 - out.plus;
    out.plus = -1.0 - out.minus;
    out.minus = lo;
  }
  return out;
}

PotterResult potter_check(const Eigen::VectorXd& I, const Eigen::VectorXd& L, double eps, double c_eps,
                          double i_eps, std::size_t max_pairs, std::uint64_t seed) {
  if (I.size() != L.size()) throw Error(ErrorCode::GridMismatch, "I and L differ in length");
  std::vector<double> li, ll, iv;
  for (Eigen::Index k = 0; k < I.size(); ++k) {
    if (I[k] >= i_eps && I[k] > 0.0 && L[k] > 0.0) {
      li.push_back(std::log(I[k]));
      ll.push_back(std::log(L[k]));
      iv.push_back(I[k]);
    }
  }
  PotterResult out;
  out.worst_excess = -std::numeric_limits<double>::infinity();
  const double log_c = std::log(c_eps);
  auto visit = [&](std::size_t i, std::size_t j) {
    const double excess = std::abs(ll[i] - ll[j]) - eps * std::abs(li[i] - li[j]) - log_c;
    ++out.pairs_checked;
    if (excess > out.worst_excess) {
      out.worst_excess = excess;
      out.worst_pair = std::make_pair(iv[i], iv[j]);
    }
  };
  const std::size_t n = li.size();
  const std::size_t total = n < 2 ? 0 : n * (n - 1) / 2;
  if (total <= max_pairs) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) visit(i, j);
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (out.pairs_checked < max_pairs) {
      const std::size_t i = pick(rng);
      const std::size_t j = pick(rng);
      if (i != j) visit(i, j);
    }
  }
  if (out.pairs_checked == 0) out.worst_excess = 0.0;
  out.pass = out.worst_excess <= 1e-12;
  if (out.pass) out.worst_pair.reset();
  return out;
}

IvResult iv_slope(const TimeSeries& Y, const TimeSeries& X, const TimeSeries& Z, std::optional<Eigen::Index> lag) {
  if (!Y.same_grid(X) || !Y.same_grid(Z)) throw Error(ErrorCode::GridMismatch, "Y, X and Z grids differ");
  if ((Y.values().array() <= 0.0).any() || (X.values().array() <= 0.0).any() || (Z.values().array() <= 0.0).any()) {
    throw Error(ErrorCode::NonPositiveValue, "IV slope works on logs of positive series");
  }
  const Eigen::Index n = Y.size();
  if (n < 3) throw Error(ErrorCode::TooShort, "IV slope needs at least three samples");
  const Eigen::ArrayXd ly = Y.values().array().log();
  const Eigen::ArrayXd lx = X.values().array().log();
  const Eigen::ArrayXd lz = Z.values().array().log();
  const Eigen::ArrayXd yc = ly - ly.mean();
  const Eigen::ArrayXd xc = lx - lx.mean();
  const Eigen::ArrayXd zc = lz - lz.mean();

  IvResult out;
  const double szz = zc.square().sum();
  const double szx = (zc * xc).sum();
  if (!(szz > 0.0)) throw Error(ErrorCode::WeakInstrument, "instrument has no variation (first-stage F = 0)");
  const double b1 = szx / szz;
  const double s2 = (xc - b1 * zc).square().sum() / static_cast<double>(n - 2);
  out.first_stage_f = s2 > 0.0 ? b1 * b1 * szz / s2 : std::numeric_limits<double>::infinity();
  if (out.first_stage_f < 10.0) {
    throw Error(ErrorCode::WeakInstrument, "first-stage F = " + std::to_string(out.first_stage_f) + " < 10");
  }
  out.slope = (zc * yc).sum() / szx;
  out.ols_slope = (xc * yc).sum() / xc.square().sum();
  const Eigen::VectorXd score = (zc * (yc - out.slope * xc)).matrix();
  const Eigen::Index use_lag = lag ? *lag : newey_west_auto_lag(n);
  out.se = std::sqrt(bartlett_lrv(score, use_lag)) / std::abs(szx);
  return out;
}

TimeSeries kalman_trend(const TimeSeries& x, double process_var, double obs_var) {
  if (!(process_var > 0.0) || !(obs_var > 0.0)) throw Error(ErrorCode::InvalidParams, "variances must be positive");
  if ((x.values().array() <= 0.0).any()) throw Error(ErrorCode::NonPositiveSeries, "'" + x.name() + "' has a non-positive value");
  const Eigen::Index n = x.size();
  if (n < 2) return x.with_values(x.values(), x.name() + "_trend", x.unit());
  const Eigen::VectorXd y = x.values().array().log();
  const Eigen::VectorXd& t = x.times();

  using Vec2 = Eigen::Vector2d;
  using Mat2 = Eigen::Matrix2d;
  const Eigen::Index n0 = std::min<Eigen::Index>(n, 10);
  Eigen::MatrixXd A(n0, 2);
  A.col(0).setOnes();
  A.col(1) = t.head(n0).array() - t[0];
  const Mat2 AtA = A.transpose() * A;
  Vec2 state = AtA.ldlt().solve(A.transpose() * y.head(n0));
  Mat2 P = obs_var * AtA.inverse();

  std::vector<Vec2> xf(static_cast<std::size_t>(n)), xp(static_cast<std::size_t>(n));
  std::vector<Mat2> Pf(static_cast<std::size_t>(n)), Pp(static_cast<std::size_t>(n)), F(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (k == 0) {
      xp[0] = state;
      Pp[0] = P;
      F[0] = Mat2::Identity();
    } else {
      const double dt = t[k] - t[k - 1];
      Mat2 Fk;
      Fk << 1.0, dt, 0.0, 1.0;
      Mat2 Q;
      Q << dt * dt * dt / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt;
      Q *= process_var;
      F[ks] = Fk;
      xp[ks] = Fk * xf[ks - 1];
      Pp[ks] = Fk * Pf[ks - 1] * Fk.transpose() + Q;
    }
    const double innovation = y[k] - xp[ks][0];
    const double S = Pp[ks](0, 0) + obs_var;
    const Vec2 K = Pp[ks].col(0) / S;
    xf[ks] = xp[ks] + K * innovation;
    Pf[ks] = Pp[ks] - K * Pp[ks].row(0);
  }
  std::vector<Vec2> xs = xf;
  for (Eigen::Index k = n - 2; k >= 0; --k) {
    const auto ks = static_cast<std::size_t>(k);
    const Mat2 C = Pf[ks] * F[ks + 1].transpose() * Pp[ks + 1].inverse();
    xs[ks] = xf[ks] + C * (xs[ks + 1] - xp[ks + 1]);
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index k = 0; k < n; ++k) out[k] = std::exp(xs[static_cast<std::size_t>(k)][0]);
  return x.with_values(std::move(out), x.name() + "_trend", x.unit());
}

// --- structural breaks ---------------------------------------------------------

nlohmann::json BreakSegmentation::to_json() const {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& [a, b] : segments) segs.push_back({a, b});
  return {{"breakpoints", breakpoints}, {"segments", std::move(segs)}, {"critical_value", critical_value}};
}

double sup_wald_critical_value(double trim, double alpha) {
  if (!(trim > 0.0 && trim < 0.5)) throw Error(ErrorCode::InvalidParams, "trim must lie in (0, 0.5)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidParams, "alpha must lie in (0,1)");
  // Tabulated asymptotic values for one restriction at 15% trimming.
  if (std::abs(trim - 0.15) < 1e-12) {
    if (std::abs(alpha - 0.10) < 1e-12) return 7.17;
    if (std::abs(alpha - 0.05) < 1e-12) return 8.68;
    if (std::abs(alpha - 0.01) < 1e-12) return 12.16;
  }
  static std::mutex mutex;
  static std::map<std::pair<double, double>, double> cache;
  const std::lock_guard<std::mutex> lock(mutex);
  if (const auto it = cache.find({trim, alpha}); it != cache.end()) return it->second;

  // sup over [trim, 1-trim] of B(r)^2 / (r (1-r)) for a Brownian bridge B, fixed seed.
  constexpr int kGrid = 2000;
  constexpr int kReps = 20000;
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal;
  std::vector<double> sups(kReps);
  std::vector<double> W(kGrid + 1);
  for (int rep = 0; rep < kReps; ++rep) {
    W[0] = 0.0;
    for (int i = 1; i <= kGrid; ++i) W[static_cast<std::size_t>(i)] = W[static_cast<std::size_t>(i - 1)] + normal(rng) / std::sqrt(double(kGrid));
    double best = 0.0;
    for (int i = 1; i < kGrid; ++i) {
      const double r = double(i) / kGrid;
      if (r < trim || r > 1.0 - trim) continue;
      const double b = W[static_cast<std::size_t>(i)] - r * W[kGrid];
      best = std::max(best, b * b / (r * (1.0 - r)));
    }
    sups[static_cast<std::size_t>(rep)] = best;
  }
  std::sort(sups.begin(), sups.end());
  const double cv = sups[static_cast<std::size_t>(std::ceil((1.0 - alpha) * kReps)) - 1];
  cache[{trim, alpha}] = cv;
  return cv;
}

namespace {

struct ScanResult {
  double stat = 0.0;
  std::size_t index = 0;  ///< first index of the second regime
};

ScanResult sup_wald_scan(const Eigen::VectorXd& y, double trim, std::size_t min_side) {
  const auto n = static_cast<std::size_t>(y.size());
  const std::size_t lo = std::max(min_side, static_cast<std::size_t>(std::ceil(trim * static_cast<double>(n))));
  const std::size_t hi = n - lo;
  ScanResult best;
  if (lo > hi) return best;
  const double scale = 1.0 + y.cwiseAbs().maxCoeff();
  const double var_floor = (1e-10 * scale) * (1e-10 * scale);
  const Eigen::Index lag = newey_west_auto_lag(static_cast<Eigen::Index>(n));
  for (std::size_t k = lo; k <= hi; ++k) {
    const auto n1 = static_cast<Eigen::Index>(k);
    const auto n2 = static_cast<Eigen::Index>(n - k);
    const double m1 = y.head(n1).mean();
    const double m2 = y.tail(n2).mean();
    Eigen::VectorXd resid(y.size());
    resid.head(n1) = y.head(n1).array() - m1;
    resid.tail(n2) = y.tail(n2).array() - m2;
    const double lrv = std::max(bartlett_lrv(resid, lag) / static_cast<double>(n), var_floor);
    const double stat = (m2 - m1) * (m2 - m1) / (lrv * (1.0 / double(n1) + 1.0 / double(n2)));
    if (stat > best.stat) best = {stat, k};
  }
  return best;
}

void segment(const Eigen::VectorXd& y, std::size_t first, std::size_t last, double trim, std::size_t min_side,
             double cv, std::vector<std::size_t>& breaks) {
  const std::size_t len = last - first;
  if (len < std::max<std::size_t>(2 * min_side, 20)) return;
  const ScanResult scan = sup_wald_scan(y.segment(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(len)),
                                        trim, min_side);
  if (scan.index == 0 || !(scan.stat > cv)) return;
  const std::size_t at = first + scan.index;
  segment(y, first, at, trim, min_side, cv, breaks);
  breaks.push_back(at);
  segment(y, at, last, trim, min_side, cv, breaks);
}

}  // namespace

BreakSegmentation sup_wald_breaks(const SlopeSeries& slopes, double trim, double alpha) {
  if (!(trim > 0.0 && trim < 0.45)) throw Error(ErrorCode::InvalidParams, "trim must lie in (0, 0.45)");
  if (slopes.size() < 30) throw Error(ErrorCode::TooShort, "break detection needs at least 30 slope points");
  const std::size_t n = slopes.size();
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = slopes[i].slope;

  BreakSegmentation out;
  out.critical_value = sup_wald_critical_value(trim, alpha);
  const auto min_side = std::max<std::size_t>(5, static_cast<std::size_t>(std::ceil(trim * static_cast<double>(n))));
  std::vector<std::size_t> breaks;
  segment(y, 0, n, trim, min_side, out.critical_value, breaks);

  std::size_t start = 0;
  for (std::size_t b : breaks) {
    out.breakpoints.push_back(slopes[b].t);
    out.segments.emplace_back(slopes[start].t, slopes[b].t);
    out.index_ranges.emplace_back(start, b);
    start = b;
  }
  out.segments.emplace_back(slopes[start].t, slopes[n - 1].t);
  out.index_ranges.emplace_back(start, n);
  return out;
}

SampleRequirement required_samples(double sigma, double tau, double delta, double alpha, double beta) {
  if (!(sigma > 0.0) || !(tau > 0.0) || !(delta > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "sigma, tau and delta must be positive");
  }
  if (!(alpha > 0.0 && alpha < 0.5) || !(beta > 0.0 && beta < 0.5)) {
    throw Error(ErrorCode::InvalidParams, "alpha and beta must lie in (0, 0.5)");
  }
  const double z = z_upper(alpha) + z_upper(beta);
  SampleRequirement r;
  r.unrounded = z * z * sigma * sigma / (delta * delta * tau * tau);
  r.m = static_cast<std::size_t>(std::ceil(r.unrounded));
  return r;
}

nlohmann::json AntagonismReport::to_json() const {
  return {{"viol", viol},
          {"viol_significant", viol_significant},
          {"sigma_I_hat", sigma_I_hat},
          {"sigma_x_hat", sigma_x_hat},
          {"residual_test_pass", residual_test_pass},
          {"cooperative_accepted", cooperative_accepted}};
}

AntagonismReport antagonism_diagnostics(const std::vector<PartialEstimate>& partials,
                                        const Eigen::VectorXd& residuals_I, const Eigen::VectorXd& residuals_x,
                                        double a_hat, double theta, double alpha) {
  if (!(theta >= 0.0 && theta < 1.0)) throw Error(ErrorCode::InvalidParams, "theta must lie in [0,1)");
  const double z = z_upper(alpha);
  AntagonismReport r;
  for (const auto& p : partials) {
    if (!p.off_diagonal || p.value >= 0.0) continue;
    r.viol += -p.value;
    if (-p.value - z * p.se > 0.0) r.viol_significant = true;
  }
  r.sigma_I_hat = residuals_I.size() > 0 ? std::max(0.0, residuals_I.maxCoeff()) : 0.0;
  r.sigma_x_hat = residuals_x.size() > 0 ? std::max(0.0, residuals_x.maxCoeff()) : 0.0;
  r.residual_test_pass = r.sigma_I_hat + r.sigma_x_hat <= theta * a_hat;
  r.cooperative_accepted = !r.viol_significant && r.residual_test_pass;
  return r;
}

double excitation_infimum(const TimeSeries& u, double window) {
  if (!(window > 0.0)) throw Error(ErrorCode::InvalidParams, "window must be positive");
  const auto& t = u.times();
  const auto& v = u.values();
  double best = std::numeric_limits<double>::infinity();
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (t[i] + window > u.back_time() + 1e-12 * std::max(1.0, std::abs(u.back_time()))) break;
    j = std::max(j, i);
    while (j + 1 < u.size() && t[j + 1] <= t[i] + window) ++j;
    best = std::min(best, v.segment(i, j - i + 1).mean());
  }
  if (std::isinf(best)) throw Error(ErrorCode::InsufficientWindow, "series shorter than one window");
  return best;
}

}  // namespace estimate
}  // namespace rsicert
