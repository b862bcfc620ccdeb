#include <doctest.h>

#include <cmath>
#include <map>

#include "rsicert/capability.hpp"
#include "rsicert/error.hpp"

using namespace rsicert;
using capability::BenchmarkSpec;

namespace {

TimeSeries series_of(const std::string& name, const Eigen::VectorXd& t, const Eigen::VectorXd& v) {
  return TimeSeries(name, "nat", t, v);
}

Eigen::VectorXd grid(double t0, double t1, int n) { return Eigen::VectorXd::LinSpaced(n, t0, t1); }

BenchmarkSpec two_tasks(double t_ref = 0.0) {
  return BenchmarkSpec{{{"a", 0.5, 1.0}, {"b", 0.5, 1.0}}, t_ref};
}

}  // namespace

TEST_CASE("BenchmarkSpec validation") {
  CHECK_NOTHROW(two_tasks().validate());
  CHECK_THROWS_AS((BenchmarkSpec{{{"a", 0.5, 1.0}, {"b", 0.4, 1.0}}, 0.0}.validate()), Error);
  CHECK_THROWS_AS((BenchmarkSpec{{{"a", 1.0, 0.0}}, 0.0}.validate()), Error);
  const auto j = two_tasks(3.0).to_json();
  const auto back = BenchmarkSpec::from_json(j);
  CHECK(back.tasks.size() == 2);
  CHECK(back.t_ref == 3.0);
}

TEST_CASE("loss_index") {
  const Eigen::VectorXd t = grid(0, 4, 5);
  SUBCASE("at the floor") {
    const BenchmarkSpec spec{{{"a", 1.0, 1.0}}, 0.0};
    std::map<std::string, TimeSeries> losses{{"a", series_of("a", t, Eigen::VectorXd::Ones(5))}};
    CHECK(capability::loss_index(losses, spec).itilde.values().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two tasks at e times the floor") {
    std::map<std::string, TimeSeries> losses{{"a", series_of("a", t, Eigen::VectorXd::Constant(5, std::exp(1.0)))},
                                             {"b", series_of("b", t, Eigen::VectorXd::Constant(5, std::exp(1.0)))}};
    const auto li = capability::loss_index(losses, two_tasks());
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(li.itilde.values()[i] == doctest::Approx(-1.0).epsilon(1e-15));
  }
  SUBCASE("scaling every ratio by e lowers the index by exactly 1, lower losses never lower it") {
    const Eigen::VectorXd la = (Eigen::ArrayXd::LinSpaced(5, 3.0, 1.5)).matrix();
    const Eigen::VectorXd lb = (Eigen::ArrayXd::LinSpaced(5, 2.0, 1.1)).matrix();
    std::map<std::string, TimeSeries> base{{"a", series_of("a", t, la)}, {"b", series_of("b", t, lb)}};
    std::map<std::string, TimeSeries> scaled{{"a", series_of("a", t, std::exp(1.0) * la)},
                                             {"b", series_of("b", t, std::exp(1.0) * lb)}};
    std::map<std::string, TimeSeries> lower{{"a", series_of("a", t, 0.9 * la)}, {"b", series_of("b", t, lb)}};
    const auto i0 = capability::loss_index(base, two_tasks()).itilde.values();
    const auto i1 = capability::loss_index(scaled, two_tasks()).itilde.values();
    const auto i2 = capability::loss_index(lower, two_tasks()).itilde.values();
    CHECK((i0 - i1).isApprox(Eigen::VectorXd::Ones(5), 1e-14));
    CHECK((i2.array() >= i0.array()).all());
  }
  SUBCASE("loss below floor warns") {
    std::map<std::string, TimeSeries> losses{{"a", series_of("a", t, Eigen::VectorXd::Constant(5, 0.5))},
                                             {"b", series_of("b", t, Eigen::VectorXd::Constant(5, 2.0))}};
    const auto w = capability::loss_index(losses, two_tasks()).warnings;
    REQUIRE(w.size() == 1);
    CHECK(w[0].find("5 sample(s)") != std::string::npos);
  }
  SUBCASE("missing task") {
    std::map<std::string, TimeSeries> losses{{"a", series_of("a", t, Eigen::VectorXd::Ones(5))}};
    try {
      capability::loss_index(losses, two_tasks());
      FAIL("expected MissingTask");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingTask);
    }
  }
}

TEST_CASE("canonicalize") {
  const Eigen::VectorXd t = grid(0, 10, 11);
  const Eigen::VectorXd itilde = (0.3 * t.array().square() - 2.0).matrix();
  const auto cap = capability::canonicalize(series_of("it", t, itilde), two_tasks(4.0));
  CHECK(std::abs(cap.I.values()[4]) < 1e-9);
  CHECK(cap.Idot.size() == cap.I.size());

  // Interior central differences of a quadratic are exact.
  for (Eigen::Index i = 1; i + 1 < t.size(); ++i) CHECK(cap.Idot.values()[i] == doctest::Approx(0.6 * t[i]).epsilon(1e-12));

  SUBCASE("geometric-mean ratio dropping by e is one aggregated nat") {
    const Eigen::VectorXd t2 = grid(0, 1, 2);
    std::map<std::string, TimeSeries> losses{
        {"a", series_of("a", t2, Eigen::Vector2d(4.0, 4.0 / std::exp(1.0)))},
        {"b", series_of("b", t2, Eigen::Vector2d(9.0, 9.0 / std::exp(1.0)))}};
    const auto li = capability::loss_index(losses, two_tasks());
    const auto c = capability::canonicalize(li.itilde, two_tasks());
    CHECK(c.I.values()[1] - c.I.values()[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("shift by a constant leaves I_can unchanged") {
    const auto shifted = capability::canonicalize(series_of("it", t, (itilde.array() + 17.25).matrix()), two_tasks(4.0));
    CHECK((shifted.I.values() - cap.I.values()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("t_ref outside the data") {
    try {
      capability::canonicalize(series_of("it", t, itilde), two_tasks(42.0));
      FAIL("expected RefOutOfRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RefOutOfRange);
    }
  }
}

TEST_CASE("finite_difference on a nonuniform grid") {
  Eigen::VectorXd t(5);
  t << 0.0, 0.5, 1.7, 2.0, 3.5;
  const Eigen::VectorXd y = (2.0 * t.array() + 1.0).matrix();
  const auto d = capability::finite_difference(t, y);
  CHECK(d.size() == 5);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(d[i] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("affine_invariance_check") {
  // I = 1/(1-t) - 1 on [0, 0.9]; Idot = (1-t)^-2.
  const int n = 400;
  const Eigen::VectorXd t = grid(0.0, 0.9, n);
  const Eigen::VectorXd I = (1.0 / (1.0 - t.array()) - 1.0).matrix();
  const Eigen::VectorXd Idot = (1.0 - t.array()).square().inverse().matrix();
  const capability::CapabilitySeries cap{series_of("I", t, I), series_of("Idot", t, Idot), two_tasks()};
  CHECK(capability::affine_invariance_check(cap, 1.0, 0.0, 0.05).invariant);
  CHECK(capability::affine_invariance_check(cap, 2.0, 0.0, 0.05).invariant);

  SUBCASE("shift by 5 with windows where I >> 5") {
    // d log Idot / d log (I + 5) = 2 (I + 5) / I, within 0.01 of 2 once I >= 1000.
    const Eigen::VectorXd tf = grid(0.999, 0.99999, n);
    const Eigen::VectorXd If = (1.0 / (1.0 - tf.array())).matrix();
    const Eigen::VectorXd Df = (1.0 - tf.array()).square().inverse().matrix();
    const capability::CapabilitySeries far{series_of("I", tf, If), series_of("Idot", tf, Df), two_tasks(0.999)};
    const auto rep = capability::affine_invariance_check(far, 1.0, 5.0, 2e-4, 0.02);
    INFO(rep.diagnostic);
    CHECK(rep.windows_compared > 0);
    CHECK(rep.invariant);
  }
}
