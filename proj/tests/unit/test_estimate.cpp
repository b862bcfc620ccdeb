#include <doctest.h>

#include <cmath>
#include <random>

#include "rsicert/error.hpp"
#include "rsicert/estimate.hpp"
#include "rsicert/stats.hpp"

using namespace rsicert;
using namespace rsicert::estimate;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

TimeSeries ts(const std::string& name, const Eigen::VectorXd& t, const Eigen::VectorXd& v) {
  return TimeSeries(name, "1", t, v);
}

Eigen::MatrixXd design(const Eigen::VectorXd& x) {
  Eigen::MatrixXd X(x.size(), 2);
  X.col(0).setOnes();
  X.col(1) = x;
  return X;
}

Eigen::VectorXd ols_residuals(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  return y - X * beta;
}

Eigen::VectorXd ar1(std::mt19937_64& rng, Eigen::Index n, double rho) {
  std::normal_distribution<double> z;
  Eigen::VectorXd e(n);
  e[0] = z(rng) / std::sqrt(1 - rho * rho);
  for (Eigen::Index i = 1; i < n; ++i) e[i] = rho * e[i - 1] + z(rng);
  return e;
}

}  // namespace

TEST_CASE("newey_west_se") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  const Eigen::Index n = 400;
  Eigen::VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = z(rng);
    y[i] = 1.0 + 2.0 * x[i] + (1.0 + std::abs(x[i])) * z(rng);
  }
  const Eigen::MatrixXd X = design(x);
  const Eigen::VectorXd u = ols_residuals(X, y);

  SUBCASE("lag 0 is the White estimator") {
    const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
    const Eigen::MatrixXd meat = X.transpose() * u.array().square().matrix().asDiagonal() * X;
    const Eigen::VectorXd white = (bread * meat * bread).diagonal().cwiseSqrt();
    const Eigen::VectorXd nw = newey_west_se(X, u, 0);
    CHECK(std::abs(nw[0] - white[0]) <= 1e-12 * white[0]);
    CHECK(std::abs(nw[1] - white[1]) <= 1e-12 * white[1]);
  }
  SUBCASE("iid errors agree with the classical SE") {
    const Eigen::Index m = 20000;
    Eigen::VectorXd xm(m), ym(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      xm[i] = z(rng);
      ym[i] = 0.5 * xm[i] + z(rng);
    }
    const Eigen::MatrixXd Xm = design(xm);
    const Eigen::VectorXd um = ols_residuals(Xm, ym);
    const double s2 = um.squaredNorm() / static_cast<double>(m - 2);
    const double classical = std::sqrt(s2 * (Xm.transpose() * Xm).inverse()(1, 1));
    const double nw = newey_west_se(Xm, um, newey_west_auto_lag(m))[1];
    CHECK(std::abs(nw / classical - 1.0) < 0.10);
  }
  SUBCASE("positive autocorrelation raises the SE with the lag") {
    const Eigen::Index m = 2000;
    const Eigen::VectorXd xa = ar1(rng, m, 0.8);
    const Eigen::VectorXd ea = ar1(rng, m, 0.8);
    const Eigen::MatrixXd Xa = design(xa);
    const Eigen::VectorXd ua = ols_residuals(Xa, (1.0 + 0.3 * xa.array()).matrix() + ea);
    const double s0 = newey_west_se(Xa, ua, 0)[1];
    const double s10 = newey_west_se(Xa, ua, 10)[1];
    CHECK(s10 > s0);
    double prev = 0.0;
    for (Eigen::Index lag = 0; lag <= 10; ++lag) {
      const double s = newey_west_se(Xa, ua, lag)[1];
      CHECK(s >= prev);
      prev = s;
    }
  }
}

TEST_CASE("rolling_elasticity") {
  SUBCASE("hyperbolic growth gives p = 2") {
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(400, 0.0, 0.9);
    const Eigen::VectorXd I = (1.0 - t.array()).inverse().matrix();
    const Eigen::VectorXd D = I.array().square().matrix();
    const double w = 0.05;
    const auto r = rolling_elasticity(ts("I", t, I), ts("D", t, D), w);
    std::size_t interior = 0;
    for (const auto& e : r.estimates) {
      if (e.t - w / 2 < 0.0 || e.t + w / 2 > 0.9) continue;
      ++interior;
      CHECK(std::abs(e.value - 2.0) < 0.05);
      CHECK(e.ci_lo <= e.value);
      CHECK(e.ci_hi >= e.value);
    }
    CHECK(interior > 300);

    // Scale invariance I -> c I (Idot scales with it).
    const auto scaled = rolling_elasticity(ts("I", t, 3.5 * I), ts("D", t, 3.5 * D), w);
    REQUIRE(scaled.estimates.size() == r.estimates.size());
    for (std::size_t k = 0; k < r.estimates.size(); ++k) {
      CHECK(scaled.estimates[k].value == doctest::Approx(r.estimates[k].value).epsilon(1e-10));
    }
  }
  SUBCASE("exponential gives p = 1") {
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(200, 0.0, 5.0);
    const Eigen::VectorXd I = t.array().exp().matrix();
    for (const auto& e : rolling_elasticity(ts("I", t, I), ts("D", t, I), 0.5).estimates) {
      CHECK(e.value == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("logistic saturation gives p < 1 on the tail") {
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(300, 0.0, 12.0);
    const Eigen::VectorXd I = (10.0 / (1.0 + 9.0 * (-t.array()).exp())).matrix();
    const Eigen::VectorXd D = (I.array() * (1.0 - I.array() / 10.0)).matrix();
    const auto r = rolling_elasticity(ts("I", t, I), ts("D", t, D), 1.0);
    for (const auto& e : r.estimates) {
      if (e.t > 6.0) CHECK(e.value < 1.0);
    }
  }
  SUBCASE("windows with Idot <= 0 become gaps") {
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(100, 0.0, 10.0);
    Eigen::VectorXd I = (1.0 + t.array()).matrix();
    Eigen::VectorXd D = Eigen::VectorXd::Ones(100);
    D[50] = -1.0;
    const auto r = rolling_elasticity(ts("I", t, I), ts("D", t, D), 1.0);
    CHECK_FALSE(r.gaps.empty());
    for (double g : r.gaps) CHECK(std::abs(g - t[50]) <= 0.5 + 1e-12);
    D.setConstant(-1.0);
    CHECK(code_of([&] { rolling_elasticity(ts("I", t, I), ts("D", t, D), 1.0); }) == ErrorCode::AllWindowsDegenerate);
  }
}

TEST_CASE("gcv_window picks a window from the dyadic grid") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(256, 0.0, 0.9);
  const Eigen::VectorXd I = (1.0 - t.array()).inverse().matrix();
  const double w = gcv_window(ts("I", t, I), ts("D", t, I.array().square().matrix()));
  bool on_grid = false;
  for (int k = 0; k <= 6; ++k) on_grid = on_grid || std::abs(w - 0.9 / std::pow(2.0, k)) < 1e-12;
  CHECK(on_grid);
}

TEST_CASE("rv_indices") {
  const Eigen::VectorXd I = Eigen::VectorXd::LinSpaced(200, 0.0, 4.0).unaryExpr([](double k) { return std::pow(10.0, k); });
  SUBCASE("exact power law") {
    const auto r = rv_indices(I, I.array().pow(0.7).matrix(), IndexKind::Q, 1.151292546497, 199, 3);
    CHECK(r.hat == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(r.rv_accepted);
    CHECK(r.minus <= r.hat);
    CHECK(r.hat <= r.plus);
  }
  SUBCASE("rho from the derivative tail") {
    const auto r = rv_indices(I, I.array().pow(-1.5).matrix(), IndexKind::Rho, 1.151292546497, 199, 3);
    CHECK(r.hat == doctest::Approx(0.5).epsilon(1e-9));
    for (double s : r.local) {
      CHECK(s >= r.minus - 1e-12);
      CHECK(s <= r.plus + 1e-12);
    }
  }
  SUBCASE("piecewise exponent is not regularly varying") {
    const Eigen::VectorXd y = I.unaryExpr([](double s) { return s < 100.0 ? std::pow(s, 0.5) : 10.0 * std::pow(s / 100.0, 1.5); });
    const auto r = rv_indices(I, y, IndexKind::Q, 1.151292546497, 199, 3);
    CHECK_FALSE(r.rv_accepted);
    CHECK(r.minus == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.plus == doctest::Approx(1.5).epsilon(1e-6));
  }
  SUBCASE("less than a decade") {
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(50, 1.0, 5.0);
    CHECK(code_of([&] { rv_indices(x, x, IndexKind::Q); }) == ErrorCode::InsufficientRange);
  }
}

TEST_CASE("potter_check") {
  const Eigen::VectorXd logI = Eigen::VectorXd::LinSpaced(400, 1.0, 100.0);
  const Eigen::VectorXd I = logI.array().exp().matrix();
  CHECK(potter_check(I, Eigen::VectorXd::Constant(400, 3.0), 0.01, 1.0).pass);

  // Slowly varying log I: the bound |log(L_i/L_j)| <= eps |log(I_i/I_j)| + log c holds once I is
  // past a threshold; at the very bottom of [e, e^100] the pair (e, e^10) exceeds log 2 by 0.709.
  const auto full = potter_check(I, logI, 0.1, 2.0);
  CHECK_FALSE(full.pass);
  const double u1 = 1.0, u10 = 10.0;
  CHECK(std::abs(std::log(u10 / u1)) - 0.1 * (u10 - u1) - std::log(2.0) == doctest::Approx(0.709438).epsilon(1e-5));
  const auto tail = potter_check(I, logI, 0.1, 2.0, std::exp(3.0));
  CHECK(tail.pass);
  CHECK(tail.worst_excess < 0.0);

  const auto fail = potter_check(I, I.array().pow(0.2).matrix(), 0.1, 1.0);
  CHECK_FALSE(fail.pass);
  REQUIRE(fail.worst_pair.has_value());
  const auto [a, b] = *fail.worst_pair;
  CHECK(std::abs(0.2 * std::log(a / b)) > 0.1 * std::abs(std::log(a / b)));
}

TEST_CASE("iv_slope") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  const Eigen::Index n = 300;
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, n - 1.0);

  SUBCASE("instrument equal to the regressor is OLS") {
    Eigen::VectorXd lx(n), ly(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      lx[i] = 0.01 * i + 0.3 * z(rng);
      ly[i] = 0.7 * lx[i] + 0.1 * z(rng);
    }
    const auto X = ts("X", t, lx.array().exp().matrix());
    const auto r = iv_slope(ts("Y", t, ly.array().exp().matrix()), X, X);
    CHECK(r.slope == doctest::Approx(r.ols_slope).epsilon(1e-12));
  }
  SUBCASE("IV beats attenuated OLS") {
    int wins = 0;
    const int runs = 200;
    for (int run = 0; run < runs; ++run) {
      std::mt19937_64 g(derive_seed(99, static_cast<std::uint64_t>(run)));
      Eigen::VectorXd latent(n), lx(n), ly(n), lz(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        lz[i] = z(g);
        latent[i] = lz[i] + 0.5 * z(g);
        lx[i] = latent[i] + 0.8 * z(g);
        ly[i] = 1.5 * latent[i] + 0.2 * z(g);
      }
      const auto r = iv_slope(ts("Y", t, ly.array().exp().matrix()), ts("X", t, lx.array().exp().matrix()),
                              ts("Z", t, lz.array().exp().matrix()));
      wins += std::abs(r.slope - 1.5) < std::abs(r.ols_slope - 1.5) ? 1 : 0;
    }
    CHECK(wins >= 0.95 * runs);
  }
  SUBCASE("independent instrument is weak") {
    Eigen::VectorXd lx(n), lz(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      lx[i] = z(rng);
      lz[i] = z(rng);
    }
    const auto X = ts("X", t, lx.array().exp().matrix());
    CHECK(code_of([&] { iv_slope(X, X, ts("Z", t, lz.array().exp().matrix())); }) == ErrorCode::WeakInstrument);
  }
}

TEST_CASE("kalman_trend") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(120, 0.0, 11.9);
  const Eigen::VectorXd latent = (2.0 * (0.3 * t.array()).exp()).matrix();
  SUBCASE("identity on a noiseless exponential") {
    const auto s = kalman_trend(ts("x", t, latent), 1e-6, 1e-4);
    CHECK(((s.values() - latent).array() / latent.array()).abs().maxCoeff() < 1e-8);
    CHECK(s.name() == "x_trend");
  }
  SUBCASE("huge observation variance leaves the model's free trend") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z(0.0, 0.05);
    Eigen::VectorXd noisy = latent;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy[i] *= std::exp(z(rng));
    const auto s = kalman_trend(ts("x", t, noisy), 1e-6, 1e12);
    const Eigen::VectorXd l = s.values().array().log().matrix();
    // A local linear trend without process noise is a straight line in log space.
    double curvature = 0.0;
    for (Eigen::Index i = 1; i + 1 < l.size(); ++i) curvature = std::max(curvature, std::abs(l[i + 1] - 2 * l[i] + l[i - 1]));
    CHECK(curvature < 1e-6);
  }
  SUBCASE("smoothing halves the log error") {
    double raw = 0.0, smooth = 0.0;
    for (int run = 0; run < 20; ++run) {
      std::mt19937_64 rng(derive_seed(1234, static_cast<std::uint64_t>(run)));
      std::normal_distribution<double> z(0.0, 0.05);
      Eigen::VectorXd noisy = latent;
      for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy[i] *= std::exp(z(rng));
      const auto s = kalman_trend(ts("x", t, noisy), 1e-6, 0.05 * 0.05);
      raw += (noisy.array().log() - latent.array().log()).square().sum();
      smooth += (s.values().array().log() - latent.array().log()).square().sum();
    }
    CHECK(std::sqrt(smooth) <= 0.5 * std::sqrt(raw));
  }
  SUBCASE("non-positive input") {
    CHECK(code_of([&] { kalman_trend(ts("x", t, -latent), 1e-6, 1e-4); }) == ErrorCode::NonPositiveSeries);
  }
}

TEST_CASE("sup_wald_breaks") {
  auto slopes_from = [](const Eigen::VectorXd& v) {
    SlopeSeries s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s.push_back({static_cast<double>(i), v[i], 0.1, 2.0});
    return s;
  };
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(0.0, 0.1);
  const Eigen::Index n = 120;

  SUBCASE("constant slope") {
    CHECK(sup_wald_breaks(slopes_from(Eigen::VectorXd::Constant(n, 1.3))).breakpoints.empty());
  }
  SUBCASE("one jump at the midpoint") {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = (i < n / 2 ? 1.0 : 2.5) + z(rng);
    const auto b = sup_wald_breaks(slopes_from(v));
    REQUIRE(b.breakpoints.size() == 1);
    CHECK(std::abs(b.breakpoints[0] - n / 2) <= 3.0);
    CHECK(b.segments.front().first == 0.0);
    CHECK(b.segments.back().second == n - 1.0);
  }
  SUBCASE("two separated jumps in order") {
    Eigen::VectorXd v(n * 2);
    for (Eigen::Index i = 0; i < 2 * n; ++i) v[i] = (i < 80 ? 1.0 : i < 160 ? 2.0 : 0.5) + z(rng);
    const auto b = sup_wald_breaks(slopes_from(v));
    REQUIRE(b.breakpoints.size() == 2);
    CHECK(std::abs(b.breakpoints[0] - 80) <= 3.0);
    CHECK(std::abs(b.breakpoints[1] - 160) <= 3.0);
  }
  SUBCASE("false-positive rate on null runs") {
    // Bartlett-HAC sup-Wald is oversized in short samples; 240 slopes is a typical pipeline length.
    const Eigen::Index m = 240;
    int hits = 0;
    for (int run = 0; run < 500; ++run) {
      std::mt19937_64 g(derive_seed(77, static_cast<std::uint64_t>(run)));
      Eigen::VectorXd v(m);
      for (Eigen::Index i = 0; i < m; ++i) v[i] = 1.0 + z(g);
      hits += sup_wald_breaks(slopes_from(v)).breakpoints.empty() ? 0 : 1;
    }
    CHECK(hits / 500.0 <= 0.05 + 0.03);
  }
  SUBCASE("tabulated critical values and short input") {
    CHECK(sup_wald_critical_value(0.15, 0.05) == 8.68);
    CHECK(sup_wald_critical_value(0.15, 0.10) == 7.17);
    CHECK(code_of([&] { sup_wald_breaks(slopes_from(Eigen::VectorXd::Ones(10))); }) == ErrorCode::TooShort);
  }
}

TEST_CASE("required_samples") {
  const auto r = required_samples(1, 1, 0.5, 0.05, 0.2);
  CHECK(r.m == 25);
  const double zsum = normal_quantile(0.95) + normal_quantile(0.8);
  CHECK(r.unrounded == doctest::Approx(zsum * zsum / 0.25).epsilon(1e-12));
  CHECK(required_samples(1, 1, 1.0, 0.05, 0.2).unrounded == doctest::Approx(r.unrounded / 4).epsilon(1e-12));
  CHECK(required_samples(2, 1, 0.5, 0.05, 0.2).unrounded == doctest::Approx(r.unrounded * 4).epsilon(1e-12));
}

TEST_CASE("antagonism_diagnostics") {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(10);
  const auto coop = antagonism_diagnostics({{"dF/dx", 0.2, 0.01, true}, {"dG/dI", 0.1, 0.01, true}}, zero, zero, 1.0, 0.5);
  CHECK(coop.viol == 0.0);
  CHECK(coop.cooperative_accepted);

  const auto anta = antagonism_diagnostics({{"dF/dx", -0.3, 0.01, true}}, zero, zero, 1.0, 0.5);
  CHECK(anta.viol == doctest::Approx(0.3));
  CHECK(anta.viol_significant);
  CHECK_FALSE(anta.cooperative_accepted);

  const Eigen::VectorXd r = Eigen::VectorXd::Constant(10, 0.2);
  const auto res = antagonism_diagnostics({}, r, r, 1.0, 0.5);
  CHECK(res.sigma_I_hat + res.sigma_x_hat == doctest::Approx(0.4));
  CHECK(res.residual_test_pass);
}

TEST_CASE("excitation_infimum") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(11, 0.0, 10.0);
  Eigen::VectorXd u = Eigen::VectorXd::Ones(11);
  u.tail(3).setConstant(0.1);
  CHECK(excitation_infimum(ts("u", t, u), 2.0) == doctest::Approx(0.1));
}

TEST_CASE("EstimationConfig JSON") {
  const auto c = EstimationConfig::from_json({{"window", 2.0}, {"lag", 3}, {"alpha", 0.1}, {"seed", 9}});
  CHECK(c.lag == std::optional<Eigen::Index>(3));
  CHECK(EstimationConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK_THROWS_AS(EstimationConfig::from_json({{"lag", "sometimes"}}), Error);
}
