#include <doctest.h>

#include "schauder/inhomogeneous.hpp"

#include <cmath>

using namespace schauder;

namespace {

OperatorSpec linear(double c = 0.0, double drift = 0.0) {
  LinearDriftSpec s;
  s.drift_matrix = SmallMatrix::Constant(1, 1, drift);
  s.potential = c;
  return build_linear_drift(s);
}

double interior_error(const GridFunction& u, double r_eval, const std::function<double(double)>& exact) {
  double e = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double x = u.point(k)[0];
    if (std::abs(x) <= r_eval) e = std::max(e, std::abs(u[k] - exact(x)));
  }
  return e;
}

ForcedProblem forced(OperatorSpec op, Datum f, Source g, double t_end = 1.0, double tau = 1.0 / 64,
                     double h = 1.0 / 32) {
  ForcedProblem p;
  p.base.op = std::move(op);
  p.base.f = std::move(f);
  p.base.g = std::move(g);
  p.base.t_end = t_end;
  p.base.tau = tau;
  p.base.h = h;
  p.base.radius = 8.0;
  return p;
}

Source constant_source(double v) {
  return {{TimeProfile::constant(v), [](const Point&) { return 1.0; }, "const"}};
}

Source sine_source() {
  return {{TimeProfile::sampler([](double t) { return std::exp(-t); }, {}, 1.0),
           [](const Point& x) { return std::sin(x[0]); }, "sin(x) e^-t"}};
}

const Datum gaussian = [](const Point& x) { return std::exp(-x.squaredNorm()); };

}  // namespace

TEST_CASE("unforced problems reduce to the homogeneous solve") {
  ForcedProblem p = forced(linear(-0.3, -1.0), gaussian, {});
  const auto a = solve_forced(p).trajectory;
  const auto b = expanding_ball_solve(p.base).trajectory;
  CHECK((a.final().values() - b.final().values()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("constant forcing gives u = t") {
  ForcedProblem p = forced(linear(0.0, -1.0), [](const Point&) { return 0.0; }, constant_source(1.0));
  p.base.output_times = {0.5, 1.0};
  ExpandingBallOptions o;
  o.radii = {8.0, 16.0};
  const auto tr = solve_forced(p, o).trajectory;
  CHECK(interior_error(tr.at(0.5), 2.0, [](double) { return 0.5; }) <= 1e-3);
  CHECK(interior_error(tr.at(1.0), 2.0, [](double) { return 1.0; }) <= 1e-3);
}

TEST_CASE("stationary forced solution") {
  ForcedProblem p = forced(linear(-1.0), [](const Point&) { return 1.0; }, constant_source(1.0));
  const auto tr = solve_forced(p).trajectory;
  for (const auto& fr : tr.frames) CHECK(interior_error(fr, 2.0, [](double) { return 1.0; }) <= 1e-10);
}

TEST_CASE("variation of constants examples") {
  {
    ForcedProblem p = forced(linear(0.0, -1.0), gaussian, {});
    p.base.output_times = {1.0};
    const VocResult v = voc_solution(p);
    DirichletProblem q = p.base;
    const auto direct = solve_dirichlet(q);
    CHECK((v.trajectory.at(1.0).values() - direct.at(1.0).values()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(v.solves == 1);
  }
  {
    ForcedProblem p = forced(linear(), [](const Point&) { return 0.0; }, constant_source(1.0));
    p.base.output_times = {0.5, 1.0};
    const VocResult v = voc_solution(p);
    CHECK(interior_error(v.trajectory.at(0.5), 2.0, [](double) { return 0.5; }) <= 1e-3 + v.quad_step * v.quad_step);
    CHECK(interior_error(v.trajectory.at(1.0), 2.0, [](double) { return 1.0; }) <= 1e-3 + v.quad_step * v.quad_step);
  }
}

TEST_CASE("variation of constants agrees with direct stepping") {
  for (const auto& op : {linear(), linear(-0.5, -1.0)}) {
    ForcedProblem p = forced(op, gaussian, sine_source());
    p.base.output_times = {0.25, 0.5, 1.0};
    VocOptions vo;
    vo.scheme = Scheme::CrankNicolson;
    const VocResult v = voc_solution(p, vo);
    ExpandingBallOptions o;
    o.radii = {8.0, 16.0};
    o.tol = 1e-3;
    o.scheme = Scheme::CrankNicolson;
    const auto direct = solve_forced(p, o).trajectory;
    const double tol = 10.0 * (p.base.tau + p.base.h * p.base.h + v.quad_step * v.quad_step);
    for (const double t : p.base.output_times) {
      const auto a = v.trajectory.at(t);
      const auto b = direct.at(t).restrict_to(a.radius());
      double d = 0.0;
      for (Eigen::Index k = 0; k < a.size(); ++k)
        if (std::abs(a.point(k)[0]) <= 2.0) d = std::max(d, std::abs(a[k] - b[k]));
      CHECK(d <= std::min(tol, 5e-3));
    }
  }
}

TEST_CASE("variation of constants respects the solve budget") {
  ForcedProblem p = forced(linear(), gaussian, sine_source(), 1.0, 1.0 / 64);
  VocOptions o;
  o.budget = 4;
  CHECK_THROWS_AS(voc_solution(p, o), BudgetError);
  o.nodes_per_unit = 8.0;
  CHECK_THROWS_AS(voc_solution(p, o), std::invalid_argument);
}

TEST_CASE("Schauder ratio examples") {
  {
    ForcedProblem p = forced(linear(), [](const Point&) { return 0.0; }, {});
    CHECK(schauder_ratio(p, solve_forced(p).trajectory).ratio == 0.0);
  }
  {
    ForcedProblem p = forced(linear(), [](const Point&) { return 1.0; }, {});
    CHECK(schauder_ratio(p, solve_forced(p).trajectory).ratio == doctest::Approx(1.0).epsilon(1e-6));
  }
  {
    std::vector<double> r;
    for (const double h : {1.0 / 16, 1.0 / 32}) {
      ForcedProblem p = forced(linear(), gaussian, {}, 1.0, 1.0 / 32, h);
      p.base.output_times = {0.25, 0.5, 1.0};
      r.push_back(schauder_ratio(p, solve_forced(p).trajectory).ratio);
    }
    CHECK(std::isfinite(r[0]));
    CHECK(std::abs(r[1] - r[0]) <= 0.1 * r[0]);
  }
}

TEST_CASE("Schauder ratio is invariant under joint scaling") {
  ForcedProblem p = forced(linear(-0.2), gaussian, sine_source());
  p.base.output_times = {0.5, 1.0};
  ForcedProblem q = p;
  q.base.f = [](const Point& x) { return 3.0 * std::exp(-x.squaredNorm()); };
  q.base.g = {{sine_source()[0].profile, [](const Point& x) { return 3.0 * std::sin(x[0]); }, "scaled"}};
  const double a = schauder_ratio(p, solve_forced(p).trajectory).ratio;
  const double b = schauder_ratio(q, solve_forced(q).trajectory).ratio;
  CHECK(b == doctest::Approx(a).epsilon(1e-10));
}

TEST_CASE("data norms are recorded") {
  ForcedProblem p = forced(linear(), gaussian, constant_source(2.0));
  record_data_norms(p);
  CHECK(p.norm_f > 1.0);
  CHECK(p.norm_g == doctest::Approx(2.0));
  p.theta = 1.0;
  CHECK_THROWS_AS(record_data_norms(p), std::invalid_argument);
}

TEST_CASE("integral identity residual") {
  {
    ForcedProblem p = forced(linear(), [](const Point&) { return 1.0; }, {});
    CHECK(integral_identity_residual(solve_forced(p).trajectory, p.base.op, {}) <= 1e-12);
  }
  {
    ForcedProblem p = forced(linear(-0.5, -1.0), gaussian, sine_source());
    const auto tr = solve_forced(p).trajectory;
    CHECK(integral_identity_residual(tr, p.base.op, p.base.g) <= 10.0 * (p.base.tau + p.base.h * p.base.h));
  }
  {
    // Coefficient jump at t = 1/2: frames at the jump are excluded.
    LinearDriftSpec s;
    s.q_profile = TimeProfile::piecewise_constant({0.5}, {1.0, 2.0});
    ForcedProblem p = forced(build_linear_drift(s), gaussian, {});
    const auto tr = solve_forced(p).trajectory;
    ResidualOptions o;
    o.excluded_times = {0.5};
    o.exclusion_tol = 0.5 * p.base.tau;
    CHECK(integral_identity_residual(tr, p.base.op, {}, o) <= 10.0 * (p.base.tau + p.base.h * p.base.h));
  }
}

TEST_CASE("Chapman-Kolmogorov consistency") {
  DirichletProblem full;
  full.op = linear(-0.3, -1.0);
  full.radius = 8.0;
  full.h = 1.0 / 32;
  full.tau = 1.0 / 64;
  full.t_end = 1.0;
  full.f = gaussian;
  full.output_times = {0.5, 1.0};
  const auto direct = solve_dirichlet(full);
  DirichletProblem second = full;
  const GridFunction mid = direct.at(0.5);
  second.s = 0.5;
  second.f = [&mid](const Point& x) {
    const int i = static_cast<int>(std::lround((x[0] + mid.radius()) / mid.step()));
    return mid[mid.index(i)];
  };
  second.output_times = {1.0};
  const auto composed = solve_dirichlet(second);
  CHECK((composed.at(1.0).values() - direct.at(1.0).values()).cwiseAbs().maxCoeff() <=
        10.0 * (full.tau + full.h * full.h));
}
