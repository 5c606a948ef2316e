#include <doctest.h>

#include "schauder/cutoff.hpp"
#include "schauder/smoothing_lab.hpp"

#include <cmath>

using namespace schauder;

namespace {

OperatorSpec heat(double horizon = 1.0) {
  LinearDriftSpec s;
  s.horizon = horizon;
  return build_linear_drift(s);
}

OperatorSpec ou() {
  PolyExampleSpec s;
  s.c0_base = TimeProfile::constant(1.0);
  return build_poly_example(s);
}

// Sharp step: every derivative of the initial datum is large, so the norm decay
// follows the heat-kernel rate over the whole ladder.
const Datum step = [](const Point& x) { return std::tanh(x[0] / 0.002); };
// C^1 kink with a large second derivative at the origin.
const Datum kink = [](const Point& x) {
  const double e = 0.002;
  const double y = std::abs(x[0]) / e;
  return e * (y + std::log1p(std::exp(-2.0 * y)) - std::log(2.0)) * std::exp(-x[0] * x[0]);
};

SmoothingOptions heat_options(double alpha, double beta) {
  SmoothingOptions o;
  o.alpha = alpha;
  o.beta = beta;
  for (int i = 0; i < 6; ++i) o.ladder.push_back(0.0064 * std::ldexp(1.0, -i));
  o.h = 1.0 / 1024;
  o.tau = o.ladder.back() / 80.0;
  o.r_eval = 1.0;
  o.ball.radii = {4.0, 8.0};
  return o;
}

}  // namespace

TEST_CASE("power-law fit recovers an exact power") {
  std::vector<double> x, y;
  for (int i = 0; i < 6; ++i) {
    x.push_back(std::ldexp(1.0, -i));
    y.push_back(3.0 * std::pow(x.back(), -0.75));
  }
  const LogLogFit f = fit_power_law(x, y);
  CHECK(f.slope == doctest::Approx(-0.75).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.residual <= 1e-12);
  CHECK_THROWS(fit_power_law({1.0}, {1.0}));
  CHECK_THROWS(fit_power_law({1.0, -1.0}, {1.0, 1.0}));
}

TEST_CASE("ladder validation") {
  SmoothingOptions o = heat_options(0.0, 1.0);
  o.ladder = {0.1, 0.2, 0.3, 0.4};
  CHECK_THROWS_AS(measure_smoothing(heat(), step, 0.0, o), std::invalid_argument);
  o.ladder = {0.1, 0.2, 0.3, 0.4, 0.5};
  CHECK_THROWS_AS(measure_smoothing(heat(), step, 0.0, o), std::invalid_argument);
  o = heat_options(0.0, 1.0);
  o.tau = o.ladder.back();
  CHECK_THROWS_AS(measure_smoothing(heat(), step, 0.0, o), std::invalid_argument);
  o = heat_options(2.0, 1.0);
  CHECK_THROWS_AS(measure_smoothing(heat(), step, 0.0, o), std::invalid_argument);
}

TEST_CASE("coarse meshes are reported as under-resolved") {
  SmoothingOptions o = heat_options(0.0, 2.0);
  o.h = 1.0 / 64;
  o.tau = 1e-6;
  CHECK_THROWS_AS(measure_smoothing(heat(), step, 0.0, o), UnderResolvedError);
}

TEST_CASE("alpha equal to beta shows no blow-up") {
  // Broad bump: the heat flow barely moves its C^1 norm over the ladder.
  const Datum smooth = [](const Point& x) { return std::exp(-x.squaredNorm() / 100.0); };
  SmoothingOptions o;
  o.alpha = o.beta = 1.0;
  o.h = 1.0 / 128;
  o.tau = 1e-3;
  o.ladder = {0.03, 0.06, 0.12, 0.25, 0.5, 1.0};
  const SmoothingFit f = measure_smoothing(heat(), smooth, 0.0, o);
  CHECK(std::abs(f.exponent) <= 0.05);
  CHECK(f.predicted == 0.0);
}

TEST_CASE("heat exponents follow (beta - alpha) / 2") {
  struct Case {
    double alpha, beta, tol;
    Datum f;
  };
  const std::vector<Case> cases{{0.0, 1.0, 0.15, step}, {0.0, 2.0, 0.15, step}, {1.0, 2.0, 0.15, kink},
                                {0.0, 3.0, 0.25, step}};
  for (const auto& c : cases) {
    const SmoothingFit f = measure_smoothing(heat(), c.f, 0.0, heat_options(c.alpha, c.beta));
    MESSAGE("(" << c.alpha << "," << c.beta << ") exponent " << f.exponent << " top " << f.top_exponent
                << " residual " << f.residual << " gap " << f.resolution_gap);
    CHECK(std::abs(f.exponent - f.predicted) <= c.tol);
  }
}

TEST_CASE("fitted exponent is scale invariant") {
  const Datum scaled = [](const Point& x) { return 7.5 * step(x); };
  const SmoothingFit a = measure_smoothing(heat(), step, 0.0, heat_options(0.0, 1.0));
  const SmoothingFit b = measure_smoothing(heat(), scaled, 0.0, heat_options(0.0, 1.0));
  CHECK(std::abs(a.exponent - b.exponent) <= 0.02);
  CHECK(b.constant == doctest::Approx(7.5 * a.constant).epsilon(1e-6));
}

TEST_CASE("bounded example follows the heat pattern") {
  for (const auto& [alpha, beta] : std::vector<std::pair<double, double>>{{0.0, 1.0}, {0.0, 2.0}}) {
    const SmoothingFit f = measure_smoothing(ou(), step, 0.0, heat_options(alpha, beta));
    MESSAGE("OU (" << alpha << "," << beta << ") exponent " << f.exponent);
    CHECK(std::abs(f.exponent - f.predicted) <= 0.2);
  }
}

TEST_CASE("cutoff profile") {
  CHECK(cutoff_profile(0.25)[0] == 1.0);
  CHECK(cutoff_profile(0.5)[0] == doctest::Approx(1.0));
  CHECK(cutoff_profile(0.75)[0] == doctest::Approx(0.5));
  CHECK(cutoff_profile(1.0)[0] == doctest::Approx(0.0));
  CHECK(cutoff_profile(1.5)[0] == 0.0);
  // Derivatives up to order 3 vanish at both ends of the transition.
  for (const double r : {0.5, 1.0})
    for (int k = 1; k <= 3; ++k) CHECK(std::abs(cutoff_profile(r)[static_cast<std::size_t>(k)]) <= 1e-12);
  // Jet against central differences.
  for (const double r : {0.6, 0.75, 0.95}) {
    const double d = 1e-5;
    for (int k = 1; k <= 3; ++k) {
      const double fd = (cutoff_profile(r + d)[k - 1] - cutoff_profile(r - d)[k - 1]) / (2.0 * d);
      CHECK(cutoff_profile(r)[static_cast<std::size_t>(k)] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  const GridFunction like = GridFunction::sample(1, 20.0, 0.25, [](const Point&) { return 0.0; });
  const GridFunction eta = cutoff_eta(8.0, like);
  for (Eigen::Index k = 0; k < eta.size(); ++k) {
    const double r = std::abs(eta.point(k)[0]);
    CHECK(eta[k] >= 0.0);
    CHECK(eta[k] <= 1.0);
    if (r <= 4.0) CHECK(eta[k] == 1.0);
    if (r >= 8.0) CHECK(eta[k] == 0.0);
  }
  const ScalarJet j = cutoff_eta_jet(8.0, Point::Constant(1, 6.0), 3);
  CHECK(j.value == doctest::Approx(0.5));
  CHECK(j.grad[0] == doctest::Approx(cutoff_profile(0.75)[1] / 8.0));
}

TEST_CASE("Bernstein functional stays below its bound") {
  const Datum f = [](const Point& x) { return std::exp(-x.squaredNorm()); };
  BernsteinOptions o;
  for (const OperatorSpec& op : {heat(), ou()}) {
    const BernsteinMonitor m = bernstein_monitor(op, f, o);
    CHECK(m.max_ratio <= 1.05);
    CHECK(m.c1 == doctest::Approx(2.0 * op.c0 + 3.0));
    CHECK_FALSE(m.derivative_noise);
  }
}

TEST_CASE("Bernstein ratio is nonincreasing as a shrinks and tends to the sup bound") {
  const Datum f = [](const Point& x) { return std::sin(2.0 * x[0]) * std::exp(-x.squaredNorm() / 4.0); };
  BernsteinOptions o;
  o.a = 0.4;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const BernsteinMonitor m = bernstein_monitor(heat(), f, o);
    CHECK(m.max_ratio <= prev + 1e-12);
    prev = m.max_ratio;
    o.a *= 0.5;
  }
  // a -> 0 leaves u^2 against e^{c1 (t-s)} ||eta f||^2.
  o.a = 1e-14;
  const BernsteinMonitor m = bernstein_monitor(heat(), f, o);
  o.a = 1e-300;
  const BernsteinMonitor z = bernstein_monitor(heat(), f, o);
  REQUIRE(m.frames.size() == z.frames.size());
  for (std::size_t k = 0; k < m.frames.size(); ++k) {
    CHECK(std::abs(m.frames[k].sup_v - z.frames[k].sup_v) <= 1e-8);
    CHECK(z.frames[k].sup_v <= z.frames[k].bound);
  }
}

TEST_CASE("zero datum gives zero functional") {
  const BernsteinMonitor m = bernstein_monitor(heat(), [](const Point&) { return 0.0; }, BernsteinOptions{});
  CHECK(m.max_ratio == 0.0);
  for (const auto& fr : m.frames) CHECK(fr.sup_v == 0.0);
}
