#include <doctest.h>

#include "schauder/mollification.hpp"

#include <cmath>
#include <random>

using namespace schauder;

namespace {

// Brute-force reference: midpoint rule with a very fine step.
double brute_mollify(const std::function<double(double)>& h, double n, double t, double horizon, int steps = 400000) {
  const double dt = horizon / steps;
  double acc = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double tau = (k + 0.5) * dt;
    acc += h(tau) * std::exp(-n * (t - tau) * (t - tau) / 4.0);
  }
  return std::sqrt(n / (4.0 * M_PI)) * acc * dt;
}

OperatorSpec two_stage(double horizon) {
  LinearDriftSpec s;
  s.horizon = horizon;
  s.q_profile = TimeProfile::piecewise_constant({0.5 * horizon}, {1.0, 2.0});
  OperatorSpec op = build_linear_drift(s);
  op.nu0 = 1.0;
  return op;
}

// int_0^T Q^(n): each tau carries the kernel mass that lands inside [0, T].
double effective_theta(double n, double horizon) {
  const int steps = 200000;
  const double dt = horizon / steps;
  double acc = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double tau = (k + 0.5) * dt;
    const double q = tau < 0.5 * horizon ? 1.0 : 2.0;
    acc += q * 0.5 * (std::erf((horizon - tau) * std::sqrt(n) / 2.0) + std::erf(tau * std::sqrt(n) / 2.0));
  }
  return acc * dt;
}

double two_stage_oracle(double theta, double x) {
  return std::exp(-x * x / (4.0 * (1.0 + theta))) / std::sqrt(1.0 + theta);
}

}  // namespace

TEST_CASE("kernel mass tends to one inside the interval") {
  const TimeProfile one = TimeProfile::constant(1.0);
  CHECK(std::abs(gaussian_mollify(one, 1e4, 1.0, 2.0) - 1.0) <= 1e-6);
  CHECK(std::abs(kernel_mass(1e4, 1.0, 2.0) - 1.0) <= 1e-6);
  // Endpoint keeps half of the mass.
  CHECK(kernel_mass(1e4, 0.0, 2.0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("jump is averaged") {
  const TimeProfile h = TimeProfile::piecewise_constant({1.0}, {3.0, -1.0});
  CHECK(gaussian_mollify(h, 1e6, 1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("ellipticity floor constant") {
  // Independent Simpson rule for (1/(2 sqrt pi)) int_0^1 e^{-s^2/4} ds.
  const int m = 2000;
  double acc = 0.0;
  for (int k = 0; k <= m; ++k) {
    const double s = static_cast<double>(k) / m;
    const double w = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * std::exp(-s * s / 4.0);
  }
  const double oracle = acc / (3.0 * m) / (2.0 * std::sqrt(M_PI));
  CHECK(nu_floor(1.0, 2.0) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(nu_floor(1.0, 2.0) == doctest::Approx(0.2603).epsilon(1e-3));
}

TEST_CASE("closed form and quadrature agree with a brute-force sum") {
  const TimeProfile pc = TimeProfile::piecewise_constant({0.3, 1.1}, {1.0, -2.0, 0.5});
  const TimeProfile sn = TimeProfile::sinusoid(1.0, 0.5, 7.0, 0.2);
  for (const double n : {4.0, 64.0, 1024.0})
    for (const double t : {0.0, 0.3, 0.77, 2.0}) {
      CHECK(gaussian_mollify(pc, n, t, 2.0) == doctest::Approx(brute_mollify(pc, n, t, 2.0)).epsilon(1e-7));
      CHECK(gaussian_mollify(sn, n, t, 2.0) == doctest::Approx(brute_mollify(sn, n, t, 2.0)).epsilon(1e-7));
    }
}

TEST_CASE("mollification is positive, order preserving and a sup contraction") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0), tt(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> jumps{0.4, 0.9, 1.5}, a(4), b(4);
    for (int k = 0; k < 4; ++k) {
      a[k] = u(rng);
      b[k] = a[k] + std::abs(u(rng));
    }
    const TimeProfile pa = TimeProfile::piecewise_constant(jumps, a);
    const TimeProfile pb = TimeProfile::piecewise_constant(jumps, b);
    const double sup = std::max(std::abs(*std::min_element(a.begin(), a.end())),
                                std::abs(*std::max_element(a.begin(), a.end())));
    for (const double n : {1.0, 30.0, 900.0}) {
      const double t = tt(rng);
      const double ma = gaussian_mollify(pa, n, t, 2.0), mb = gaussian_mollify(pb, n, t, 2.0);
      CHECK(ma <= mb + 1e-14);
      CHECK(std::abs(ma) <= sup + 1e-14);
      const TimeProfile pos = TimeProfile::piecewise_constant(jumps, {std::abs(a[0]), std::abs(a[1]), std::abs(a[2]), std::abs(a[3])});
      CHECK(gaussian_mollify(pos, n, t, 2.0) >= 0.0);
    }
  }
}

TEST_CASE("pointwise convergence at continuity points") {
  const TimeProfile h = TimeProfile::piecewise_linear({0.0, 0.7, 2.0}, {1.0, -1.0, 0.5});
  const double t = 0.75;
  double prev = std::numeric_limits<double>::infinity();
  for (const double n : {16.0, 64.0, 256.0, 1024.0, 4096.0}) {
    const double dev = std::abs(gaussian_mollify(h, n, t, 2.0) - h(t));
    CHECK(dev < prev);
    prev = dev;
  }
  CHECK(prev <= 1e-3);
}

TEST_CASE("mollified operator keeps the ellipticity floor") {
  const OperatorSpec op = two_stage(2.0);
  const double floor = nu_floor(1.0, 2.0);
  for (const double n : {1.0, 4.0, 64.0, 1024.0}) {
    const MollifiedOperator m(op, n);
    for (int k = 0; k <= 40; ++k) {
      const double t = 2.0 * k / 40.0;
      CHECK(m.nu_n(t, Point::Constant(1, 0.3)) >= floor - 1e-12);
    }
  }
}

TEST_CASE("Jensen direction and preserved compatibility") {
  const TimeProfile h = TimeProfile::piecewise_constant({1.0}, {0.2, 1.5});
  for (const double n : {1.0, 16.0, 256.0})
    for (const double t : {0.0, 0.5, 1.0, 1.7}) CHECK(jensen_gap(h, n, t, 2.0) >= -1e-14);
  // A constant c leaves c^2 m (1 - m) with m the kernel mass.
  const double m = kernel_mass(64.0, 1.0, 2.0);
  CHECK(jensen_gap(TimeProfile::constant(0.7), 64.0, 1.0, 2.0) == doctest::Approx(0.49 * m * (1.0 - m)).epsilon(1e-6));

  PolyExampleSpec ps;
  ps.p = 1;
  ps.q = 2;
  ps.r = 1;
  ps.horizon = 2.0;
  ps.regime = TimeRegime::Measurable;
  ps.b0 = TimeProfile::piecewise_constant({1.0}, {-1.0, -0.5});
  ps.c0_base = TimeProfile::constant(0.5);
  const OperatorSpec op = build_poly_example(ps);
  CompatConstants c;
  c.l1 = 0.25;
  c.l2 = 0.25;
  c.l3 = 4.0;
  const PreservationReport rep = hypothesis_preservation_check(op, c, {1.0, 16.0, 256.0}, 3.0, 400);
  CHECK(rep.rows.size() == 3);
  for (const auto& row : rep.rows) CHECK(row.jensen_margin >= -1e-12);
}

TEST_CASE("time-independent coefficients are reproduced by every ladder member") {
  LinearDriftSpec s;
  s.horizon = 1.0;
  const OperatorSpec op = build_linear_drift(s);
  DirichletProblem p;
  p.op = op;
  p.t_end = 0.5;
  p.tau = 1.0 / 64;
  p.h = 1.0 / 16;
  p.f = [](const Point& x) { return std::exp(-x.squaredNorm()); };
  DiscontinuousOptions o;
  o.n_ladder = {4.0, 16.0};
  const auto r = solve_discontinuous(p, o);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].n == 4.0);
  // Only the boundary mass deficit separates the members.
  CHECK(r.rows[1].increment_sup <= 0.1);
}

TEST_CASE("two-stage heat converges to the composed Gaussian") {
  const double horizon = 2.0;
  DirichletProblem p;
  p.op = two_stage(horizon);
  p.t_end = horizon;
  p.tau = 5e-3;
  p.h = 1.0 / 32;
  p.f = [](const Point& x) { return std::exp(-x.squaredNorm() / 4.0); };
  DiscontinuousOptions o;
  const auto r = solve_discontinuous(p, o);
  REQUIRE(r.rows.size() == 4);
  for (std::size_t k = 2; k < r.rows.size(); ++k) CHECK(r.rows[k].increment_sup < r.rows[k - 1].increment_sup);
  const GridFunction& u = r.trajectory.final();
  const double theta = effective_theta(256.0, horizon);
  double err = 0.0, err_limit = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double x = u.point(k)[0];
    if (std::abs(x) > 2.0) continue;
    err = std::max(err, std::abs(u[k] - two_stage_oracle(theta, x)));
    err_limit = std::max(err_limit, std::abs(u[k] - two_stage_oracle(3.0, x)));
  }
  MESSAGE("two-stage error " << err << " (against the unmollified limit " << err_limit << ")");
  CHECK(err <= 5e-3);
  CHECK(err_limit <= 1e-2);
  for (const auto& row : r.rows) CHECK(std::isfinite(row.residual));
}

TEST_CASE("time-constant coefficients only lose Gaussian tail mass") {
  const double horizon = 2.0;
  for (const double n : {1.0, 4.0, 16.0, 64.0}) {
    const double tail = std::exp(-n * horizon * horizon / 16.0);
    const double c = gaussian_mollify(TimeProfile::constant(0.5), n, 0.5 * horizon, horizon);
    CHECK(c <= 0.5);
    CHECK(c >= 0.5 * (1.0 - 2.0 * tail));
  }
}

TEST_CASE("two-stage residual stays at discretization size off the jump") {
  DirichletProblem p;
  p.op = two_stage(2.0);
  p.t_end = 2.0;
  p.tau = 5e-3;
  p.h = 1.0 / 32;
  p.f = [](const Point& x) { return std::exp(-x.squaredNorm() / 4.0); };
  DiscontinuousOptions o;
  const auto r = solve_discontinuous(p, o);
  for (const auto& row : r.rows) MESSAGE("n=" << row.n << " residual " << row.residual << " inc " << row.increment_sup);
  CHECK(r.rows.back().residual <= 10.0 * (p.tau + p.h * p.h));
}
