// One PASS/FAIL line per acceptance criterion; exit status 1 when any fails.
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rsicert/certify.hpp"
#include "rsicert/dynamics.hpp"
#include "rsicert/envelopes.hpp"
#include "rsicert/estimate.hpp"
#include "rsicert/pipeline.hpp"
#include "rsicert/safectl.hpp"
#include "rsicert/stats.hpp"

namespace fs = std::filesystem;
using namespace rsicert;

namespace {

const fs::path kFixtures = RSICERT_FIXTURES;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

TimeSeries ts(const std::string& name, const Eigen::VectorXd& t, const Eigen::VectorXd& v) {
  return TimeSeries(name, "1", t, v);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 1. Blow-up time of Idot = a0 I^p against the closed form, corrected for the
// finite detection threshold M: t_M = (I0^{1-p} - M^{1-p}) / (a0 (p-1)).
Outcome blowup_grid() {
  const auto start = std::chrono::steady_clock::now();
  const double M = 1e12;
  double worst = 0.0;
  int cases = 0;
  bool all_detected = true;
  for (double p : {1.5, 2.0, 3.0}) {
    for (double a0 : {0.5, 1.0, 2.0}) {
      for (double I0 : {0.5, 1.0, 2.0}) {
        const double t_exact = (std::pow(I0, 1 - p) - std::pow(M, 1 - p)) / (a0 * (p - 1));
        const auto phi = dynamics::PhiSpec::power(p, 1.0, 1e-3);
        const auto r = dynamics::integrate(dynamics::envelope_rhs([a0](double) { return a0; }, phi), I0,
                                           2.0 * t_exact, M);
        all_detected = all_detected && r.outcome == dynamics::Outcome::BlowupDetected;
        worst = std::max(worst, std::abs(r.t_end - t_exact) / t_exact);
        ++cases;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {all_detected && cases == 27 && worst <= 1e-3 && secs < 5.0,
          fmt("%d cases, max rel err %.2e (tol 1e-3), %.2f s (limit 5 s)", cases, worst, secs)};
}

// 2. Osgood classification of s^p at the boundary and of s log s.
Outcome osgood_boundary() {
  bool ok = true;
  std::string seen;
  for (double p : {0.5, 0.9, 1.0, 1.01, 1.5}) {
    const bool div = dynamics::osgood_classify(dynamics::PhiSpec::power(p), 1.0).divergent;
    ok = ok && div == (p <= 1.0);
    seen += fmt("p=%g:%s ", p, div ? "div" : "conv");
  }
  const bool slogs = dynamics::osgood_classify(dynamics::PhiSpec::power_log(1.0, 1.0, 2.0), 2.0).divergent;
  ok = ok && slogs;
  return {ok, seen + fmt("s*log(s):%s", slogs ? "div" : "conv")};
}

// 3. Local elasticity of I = 1/(1-t), where Idot = I^2 exactly.
Outcome elasticity_recovery() {
  const Eigen::Index n = 400;
  const double t_end = 0.9, w = 0.2;
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, t_end);
  const Eigen::VectorXd I = (1.0 - t.array()).inverse().matrix();
  const Eigen::VectorXd D = I.array().square().matrix();

  const auto clean = estimate::rolling_elasticity(ts("I", t, I), ts("D", t, D), w);
  double lo = 1e9, hi = -1e9;
  std::size_t interior = 0;
  for (const auto& e : clean.estimates) {
    if (e.t - w / 2 < 0.0 || e.t + w / 2 > t_end) continue;
    ++interior;
    lo = std::min(lo, e.value);
    hi = std::max(hi, e.value);
  }
  const bool clean_ok = interior > 0 && lo >= 1.95 && hi <= 2.05;

  // Coverage at the last interior window center, 1% multiplicative noise on I and Idot.
  const double t_ref = t_end - w / 2;
  const int runs = 200;
  int covered = 0;
  for (int run = 0; run < runs; ++run) {
    std::mt19937_64 rng(derive_seed(3, static_cast<std::uint64_t>(run)));
    std::normal_distribution<double> z(0.0, 0.01);
    Eigen::VectorXd In = I, Dn = D;
    for (Eigen::Index i = 0; i < n; ++i) {
      In[i] *= 1.0 + z(rng);
      Dn[i] *= 1.0 + z(rng);
    }
    const auto r = estimate::rolling_elasticity(ts("I", t, In), ts("D", t, Dn), w);
    const auto it = std::min_element(r.estimates.begin(), r.estimates.end(), [&](const auto& a, const auto& b) {
      return std::abs(a.t - t_ref) < std::abs(b.t - t_ref);
    });
    if (it != r.estimates.end() && it->ci_lo <= 2.0 && 2.0 <= it->ci_hi) ++covered;
  }
  const double coverage = static_cast<double>(covered) / runs;
  return {clean_ok && coverage >= 0.90,
          fmt("noiseless interior range [%.4f, %.4f] over %zu windows; noisy CI coverage %.3f (need >= 0.90)", lo, hi,
              interior, coverage)};
}

// 4. Size of the superlinearity test on exponential growth (true p = 1).
Outcome superlinearity_size() {
  const Eigen::Index n = 200;
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, 10.0);
  const Eigen::VectorXd I = (0.5 * t.array()).exp().matrix();
  const Eigen::VectorXd D = 0.5 * I;
  const int runs = 1000;
  int rejections = 0;
  for (int run = 0; run < runs; ++run) {
    std::mt19937_64 rng(derive_seed(4, static_cast<std::uint64_t>(run)));
    std::normal_distribution<double> z(0.0, 0.01);
    Eigen::VectorXd In = I, Dn = D;
    for (Eigen::Index i = 0; i < n; ++i) {
      In[i] *= std::exp(z(rng));
      Dn[i] *= std::exp(z(rng));
    }
    const auto r = estimate::rolling_elasticity(ts("I", t, In), ts("D", t, Dn), 20.0);
    const auto& mid = r.estimates[r.estimates.size() / 2];
    rejections += certify::test_superlinearity(mid.value, mid.se, 0.05).reject ? 1 : 0;
  }
  const double rate = static_cast<double>(rejections) / runs;
  return {rate <= 0.07, fmt("rejection rate %.3f over %d runs (limit 0.07)", rate, runs)};
}

// 5. Bonferroni ceiling test on synthetic capital-compute fixtures.
Outcome ceiling_fixtures() {
  const Eigen::Index n = 200;
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, n - 1.0);
  const Eigen::VectorXd logK = Eigen::VectorXd::LinSpaced(n, 0.0, 5.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 0.01);
  auto noisy_power = [&](double e) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = std::exp(e * logK[i] + z(rng));
    return v;
  };
  const auto K = ts("K", t, logK.array().exp().matrix());
  const auto caps = envelopes::ceiling_elasticities(K, ts("B_io", t, noisy_power(0.3)), ts("B_mem", t, noisy_power(0.4)),
                                                    ts("P_over_T", t, noisy_power(0.5)), 60.0);
  auto decide = [&](double slope) {
    const Eigen::VectorXd logC = (slope * logK.array()).matrix() + Eigen::VectorXd::NullaryExpr(n, [&] { return z(rng); });
    Eigen::MatrixXd X(n, 2);
    X.col(0).setOnes();
    X.col(1) = logK;
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(logC);
    const Eigen::VectorXd se = estimate::newey_west_se(X, logC - X * beta, newey_west_auto_lag(n));
    return certify::test_ceiling(beta[1], se[1], {caps.io.slope, caps.io.se}, {caps.mem.slope, caps.mem.se},
                                 {caps.pow.slope, caps.pow.se}, 0.05);
  };
  const auto steep = decide(1.0);
  const auto shallow = decide(0.25);
  return {steep.reject && !shallow.reject,
          fmt("ceilings io %.3f mem %.3f pow %.3f; slope 1.0 reject=%d (lhs %.3f rhs %.3f); slope 0.25 reject=%d (z=%.3f)",
              caps.io.slope, caps.mem.slope, caps.pow.slope, steep.reject, steep.lhs, steep.rhs, shallow.reject,
              steep.z)};
}

// 6. End-to-end certificates on the two fixtures and the region table.
Outcome end_to_end() {
  pipeline::RunOptions b;
  b.config = kFixtures / "case_b/certify.json";
  const auto cb = pipeline::run_certify(b).certificate;
  pipeline::RunOptions a;
  a.config = kFixtures / "case_a/certify.json";
  const auto ca = pipeline::run_certify(a).certificate;
  const double T_K_expected = 2.0 * std::pow(1.0, 1.0 - 2.0) / (1.0 * (2.0 - 1.0));
  const double T_K = ca.extras.at("capital").at("T_K").get<double>();

  using dynamics::Conclusion;
  using dynamics::Region;
  const dynamics::CapitalParams cp{1.0, 1.0, 2.0, 0.0};
  const auto r1 = dynamics::classify_region(2.0, 2.0, {}, cp);
  const auto r2 = dynamics::classify_region(2.0, 0.5, {});
  const auto r3 = dynamics::classify_region(0.5, 1.2, {true, false, true});
  const auto r4 = dynamics::classify_region(0.5, 0.9, {false, true, false});
  const bool table = r1.region == Region::ASupercritical && r1.conclusion == Conclusion::FiniteTimeBlowup &&
                     r2.region == Region::ASubcritical && r2.conclusion == Conclusion::Nonsingular &&
                     r3.region == Region::BCapped && r3.conclusion == Conclusion::FiniteTimeBlowup &&
                     r4.region == Region::CLogistic && r4.conclusion == Conclusion::Nonsingular;
  return {cb.verdict == Verdict::NonsingularCertified && ca.verdict == Verdict::SingularAdmissible &&
              T_K == T_K_expected && table,
          fmt("case B %s; case A %s with T_K=%.17g (expected %.17g); region table %s", to_string(cb.verdict).c_str(),
              to_string(ca.verdict).c_str(), T_K, T_K_expected, table ? "4/4" : "mismatch")};
}

// Refined grid search for the slack QP, evaluated in long double.
Eigen::VectorXd qp_grid(const Eigen::VectorXd& u_ref, const safectl::BarrierRow& row, Eigen::VectorXd lo,
                        Eigen::VectorXd hi, double rho) {
  const Eigen::Index n = u_ref.size();
  auto f = [&](const Eigen::VectorXd& u) {
    long double q = 0.0L, au = 0.0L;
    for (Eigen::Index i = 0; i < n; ++i) {
      const long double d = static_cast<long double>(u[i]) - u_ref[i];
      q += d * d;
      au += static_cast<long double>(row.a[i]) * u[i];
    }
    const long double zeta = std::max(0.0L, au - row.b);
    return 0.5L * q + rho * zeta * zeta;
  };
  const int pts = n == 1 ? 2001 : 201;
  Eigen::VectorXd best = 0.5 * (lo + hi), cand(n);
  for (int pass = 0; pass < 60; ++pass) {
    long double best_f = std::numeric_limits<long double>::infinity();
    const Eigen::VectorXd step = (hi - lo) / (pts - 1);
    const int total = n == 1 ? pts : pts * pts;
    for (int k = 0; k < total; ++k) {
      cand[0] = lo[0] + step[0] * (k % pts);
      if (n == 2) cand[1] = lo[1] + step[1] * (k / pts);
      const long double v = f(cand);
      if (v < best_f) {
        best_f = v;
        best = cand;
      }
    }
    lo = (best - 4.0 * step).cwiseMax(lo);
    hi = (best + 4.0 * step).cwiseMin(hi);
  }
  return best;
}

// 7. Closed-loop invariance over 20 supercritical plants.
Outcome control_invariance() {
  ControlConfig c;
  c.I_bar = 5.0;
  c.kappa = 2.0;
  c.Delta = 0.01;
  int plants = 0;
  double worst_exact = -1e9, worst_slack = 0.0, worst_ratio = 0.0;
  bool ok = true;
  for (double p : {1.2, 1.5, 2.0, 2.5, 3.0}) {
    for (double I0 : {0.5, 1.0, 2.0, 4.0}) {
      ++plants;
      safectl::PlantScenario plant;
      plant.phi = dynamics::PhiSpec::power(p, 1.0, 0.1);
      plant.I0 = I0;
      plant.steps = 400;
      const auto exact = safectl::supervise(plant, c);
      ok = ok && exact.final_status == "completed";
      for (const auto& s : exact.log) {
        worst_exact = std::max(worst_exact, s.I - c.I_bar);
        worst_slack = std::max(worst_slack, s.slack);
        ok = ok && s.I <= c.I_bar && s.slack <= c.slack_tol;
      }

      auto cn = c;
      cn.eps_I = 0.05;
      cn.tau_bar = 0.005;
      cn.L_h = plant.phi(c.I_bar) * c.u_max[0];  // bound on |hdot| over the operating set
      plant.estimation_error = cn.eps_I;
      plant.latency = 0.004;
      plant.seed = static_cast<std::uint64_t>(plants);
      const auto noisy = safectl::supervise(plant, cn);
      const double margin = cn.kappa * cn.eps_I + cn.L_h * cn.tau_bar;
      ok = ok && noisy.final_status == "completed" && noisy.max_overshoot <= margin;
      worst_ratio = std::max(worst_ratio, noisy.max_overshoot / margin);
    }
  }

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_gap = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = trial % 2 == 0 ? 1 : 2;
    Eigen::VectorXd ref(n), a(n), lo(n), hi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      ref[i] = 2.0 * u(rng);
      a[i] = u(rng);
      lo[i] = -1.0 + 0.5 * u(rng);
      hi[i] = 1.0 + 0.5 * u(rng);
    }
    const safectl::BarrierRow row{a, 0.5 * u(rng)};
    ControlConfig q;
    q.u_min = lo;
    q.u_max = hi;
    q.slack_weight = std::pow(10.0, 2.0 * (u(rng) + 1.0));
    const auto r = safectl::qp_step(ref, ref, row, q);
    worst_gap = std::max(worst_gap, (r.u_star - qp_grid(ref, row, lo, hi, q.slack_weight)).cwiseAbs().maxCoeff());
  }
  ok = ok && plants == 20 && worst_gap <= 1e-8;
  return {ok, fmt("%d plants: exact-state max(I - I_bar) %.3g, max slack %.2g (tol %.0e); noisy overshoot at most "
                  "%.2f of the margin; QP vs grid max gap %.2e (tol 1e-8)",
                  plants, worst_exact, worst_slack, c.slack_tol, worst_ratio, worst_gap)};
}

// 8. Envelope arithmetic against a 50-digit oracle and a log-normal Monte Carlo.
Outcome envelope_arithmetic() {
  using big = boost::multiprecision::cpp_bin_float_50;
  const big oracle = 1 / (big("1.380649e-23") * big(300) * boost::multiprecision::log(big(2)));
  const double phi = envelopes::phi_pt(1.0, 300.0, 1.0);
  const double rel = static_cast<double>(abs((big(phi) - oracle) / oracle));
  const auto band = envelopes::propagate_uncertainty({0.01, 0.01, 0.01, 0.01, 0.01});

  const double d = 0.02;
  const auto wide = envelopes::propagate_uncertainty({d, d, d, d, d});
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  const int draws = 20000;
  std::vector<double> ratio(draws);
  // Efficiencies sit at 0.9 so perturbed draws stay inside (0, 1]; the COP error is
  // applied to the cooling factor COP/(1+COP), the quantity the band treats as unit-elastic.
  const double base = envelopes::phi_pt(envelopes::usable_power(1.0, 3.0, 0.9, 0.9), 300.0, 1.0);
  for (int k = 0; k < draws; ++k) {
    const double p_fac = std::exp(d * z(rng)), cooling = std::exp(d * z(rng)), elec = 0.9 * std::exp(d * z(rng));
    const double use = 0.9 * std::exp(d * z(rng)), T = 300.0 * std::exp(d * z(rng));
    ratio[k] = envelopes::phi_pt(cooling * envelopes::usable_power(p_fac, 3.0, elec, use), T, 1.0) / base;
  }
  std::sort(ratio.begin(), ratio.end());
  const double mc_hi = ratio[static_cast<std::size_t>(0.975 * draws)] - 1.0;
  const double mc_lo = 1.0 - ratio[static_cast<std::size_t>(0.025 * draws)];
  const double dev_hi = std::abs(mc_hi / (wide.upper_factor - 1.0) - 1.0);
  const double dev_lo = std::abs(mc_lo / (1.0 - wide.lower_factor) - 1.0);
  return {rel <= 1e-12 && band.first_order == 0.05 && dev_hi <= 0.10 && dev_lo <= 0.10,
          fmt("phi_PT %.6e rel err %.1e; band %.17g; MC 95%% band vs first order: +%.2f%% / -%.2f%% deviation", phi, rel,
              band.first_order, 100 * dev_hi, 100 * dev_lo)};
}

// 9. Estimator identities.
Outcome estimator_identities() {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  const Eigen::Index n = 300;
  Eigen::VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = z(rng);
    y[i] = 1.0 + 2.0 * x[i] + (1.0 + std::abs(x[i])) * z(rng);
  }
  Eigen::MatrixXd X(n, 2);
  X.col(0).setOnes();
  X.col(1) = x;
  const Eigen::VectorXd res = y - X * X.colPivHouseholderQr().solve(y);
  const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
  const Eigen::VectorXd white =
      (bread * (X.transpose() * res.array().square().matrix().asDiagonal() * X) * bread).diagonal().cwiseSqrt();
  const double nw_gap = ((estimate::newey_west_se(X, res, 0) - white).array() / white.array()).abs().maxCoeff();

  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(120, 0.0, 11.9);
  const Eigen::VectorXd latent = (2.0 * (0.3 * t.array()).exp()).matrix();
  const auto smooth = estimate::kalman_trend(ts("x", t, latent), 1e-6, 1e-4);
  const double kalman_gap = ((smooth.values() - latent).array() / latent.array()).abs().maxCoeff();

  const Eigen::VectorXd tt = Eigen::VectorXd::LinSpaced(n, 0.0, n - 1.0);
  Eigen::VectorXd lx(n), ly(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lx[i] = 0.01 * i + 0.3 * z(rng);
    ly[i] = 0.7 * lx[i] + 0.1 * z(rng);
  }
  const auto Xs = ts("X", tt, lx.array().exp().matrix());
  const auto iv = estimate::iv_slope(ts("Y", tt, ly.array().exp().matrix()), Xs, Xs);
  const double iv_gap = std::abs(iv.slope - iv.ols_slope) / std::abs(iv.ols_slope);
  return {nw_gap <= 1e-12 && kalman_gap <= 1e-8 && iv_gap <= 1e-12,
          fmt("NW lag 0 vs White %.1e (tol 1e-12); Kalman identity %.1e (tol 1e-8); IV vs OLS %.1e", nw_gap, kalman_gap,
              iv_gap)};
}

// 10. Discrete recursion I_{n+1} = I_n + a I_n^p.
Outcome discrete_recursion() {
  const auto r = dynamics::discrete_rsi(1.0, 1.0, 2.0, 1e12);
  bool slopes_ok = true;
  std::string slopes;
  for (double p : {1.5, 2.0, 3.0}) {
    const auto logI = dynamics::discrete_log_trajectory(1.0, 1.0, p, 60);
    const double s = dynamics::loglog_growth_slope(logI, 20);
    slopes_ok = slopes_ok && std::abs(s / std::log(p) - 1.0) <= 0.05;
    slopes += fmt(" p=%g: %.4f vs %.4f;", p, s, std::log(p));
  }
  return {r.steps_to_threshold == 7 && r.published_step_bound == 1 && !r.bound_respected && r.discrepancy && slopes_ok,
          fmt("steps %zu (index %zu), published bound %zu, bound_respected=%d, discrepancy=%d; loglog slopes%s",
              r.steps_to_threshold, r.index_at_threshold, r.published_step_bound, r.bound_respected, r.discrepancy,
              slopes.c_str())};
}

// 11. Sample-size rule and Monte Carlo power at the computed m.
Outcome power_analysis() {
  const auto req = estimate::required_samples(1.0, 1.0, 0.5, 0.05, 0.2);
  // Matching model: m draws of p with mean 1 + delta tau and sd sigma, known sigma.
  const int runs = 500;
  int rejections = 0;
  for (int run = 0; run < runs; ++run) {
    std::mt19937_64 rng(derive_seed(11, static_cast<std::uint64_t>(run)));
    std::normal_distribution<double> z(1.0 + 0.5 * 1.0, 1.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < req.m; ++i) sum += z(rng);
    const double mean = sum / static_cast<double>(req.m);
    rejections += certify::test_superlinearity(mean, 1.0 / std::sqrt(static_cast<double>(req.m)), 0.05).reject;
  }
  const double power = static_cast<double>(rejections) / runs;
  return {req.m == 25 && power >= 0.75, fmt("m=%zu; power %.3f over %d runs (need >= 0.75)", req.m, power, runs)};
}

// 12. Byte-identical certificates from repeated runs.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "rsicert_acceptance";
  fs::remove_all(root);
  std::ostringstream sink;
  bool same = true;
  for (const char* fixture : {"case_a", "case_b"}) {
    std::string first;
    for (int k = 0; k < 3; ++k) {
      pipeline::RunOptions o;
      o.config = kFixtures / fixture / "certify.json";
      o.out = root / fixture / std::to_string(k);
      pipeline::cmd_certify(o, sink);
      const std::string bytes = slurp(o.out / "certificate.json");
      if (k == 0) first = bytes;
      same = same && !bytes.empty() && bytes == first;
    }
  }
  fs::remove_all(root);
  return {same, "3 runs per fixture, certificate.json compared byte for byte"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"blow-up closed form", blowup_grid},
      {"Osgood boundary", osgood_boundary},
      {"rolling elasticity recovery", elasticity_recovery},
      {"superlinearity test size", superlinearity_size},
      {"ceiling test", ceiling_fixtures},
      {"end-to-end certificates", end_to_end},
      {"control invariance", control_invariance},
      {"envelope arithmetic", envelope_arithmetic},
      {"estimator identities", estimator_identities},
      {"discrete recursion", discrete_recursion},
      {"power analysis", power_analysis},
      {"determinism", determinism},
  };
  int failed = 0;
  int k = 0;
  for (const auto& [name, run] : criteria) {
    ++k;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", k - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
