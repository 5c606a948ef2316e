#include "schauder/smoothing_lab.hpp"

#include "schauder/cutoff.hpp"
#include "schauder/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace schauder {

LogLogFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("power-law fit needs at least two points");
  const std::size_t n = x.size();
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("power-law fit needs positive data");
    a(static_cast<Eigen::Index>(i), 0) = std::log(x[i]);
    a(static_cast<Eigen::Index>(i), 1) = 1.0;
    b[static_cast<Eigen::Index>(i)] = std::log(y[i]);
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
  LogLogFit fit{c[0], c[1], 0.0};
  fit.residual = std::sqrt((a * c - b).squaredNorm() / static_cast<double>(n));
  return fit;
}

std::vector<double> default_ladder(double horizon) {
  std::vector<double> v;
  for (int i = 1; i <= 8; ++i) v.push_back(horizon * std::ldexp(1.0, -i));
  return v;
}

namespace {

struct Metered {
  double full = 0.0;
  double top = 0.0;
};

Metered meter(const GridFunction& u, double beta, double r_eval, const NormOptions& opts) {
  const HolderNormEstimate e = fractional_norm(u, beta, r_eval, opts);
  const int k = static_cast<int>(std::floor(beta + 1e-12));
  return {e.value, e.alpha > 0.0 ? e.seminorm : e.sup_terms[static_cast<std::size_t>(k)]};
}

}  // namespace

SmoothingFit measure_smoothing(const OperatorSpec& op, const Datum& f, double s, const SmoothingOptions& opts) {
  if (!(opts.beta >= 0.0 && opts.beta <= 3.0)) throw std::invalid_argument("beta must lie in [0, 3]");
  if (!(opts.alpha >= 0.0 && opts.alpha <= opts.beta)) throw std::invalid_argument("alpha must lie in [0, beta]");
  std::vector<double> ladder = opts.ladder.empty() ? default_ladder(op.horizon() - s) : opts.ladder;
  std::sort(ladder.begin(), ladder.end());
  if (ladder.size() < 5) throw std::invalid_argument("smoothing fit needs at least 5 ladder points");
  if (std::log10(ladder.back() / ladder.front()) < 1.5 - 1e-9)
    throw std::invalid_argument("ladder must span at least 1.5 decades");
  if (ladder.front() < 20.0 * opts.tau * (1.0 - 1e-9))
    throw std::invalid_argument("ladder point below 20 tau");

  DirichletProblem base;
  base.op = op;
  base.h = opts.h;
  base.tau = opts.tau;
  base.s = s;
  base.t_end = s + ladder.back();
  base.f = f;
  for (const double e : ladder) base.output_times.push_back(s + e);
  const ExpandingBallResult run = expanding_ball_solve(base, opts.ball);
  const Trajectory& traj = run.trajectory;

  SmoothingFit fit;
  fit.alpha = opts.alpha;
  fit.beta = opts.beta;
  fit.predicted = 0.5 * (opts.beta - opts.alpha);
  fit.elapsed = ladder;
  fit.norms.resize(ladder.size());
  fit.top.resize(ladder.size());
  std::vector<double> gaps(ladder.size(), 0.0);
  parallel_tasks(ladder.size(), [&](std::size_t i) {
    const GridFunction& u = traj.at(s + ladder[i], 1e-9 + 1e-6 * opts.tau);
    const Metered m = meter(u, opts.beta, opts.r_eval, opts.norms);
    fit.norms[i] = m.full;
    fit.top[i] = m.top;
    if (opts.resolution_check) {
      const Metered c = meter(u.coarsen(), opts.beta, opts.r_eval, opts.norms);
      gaps[i] = std::abs(c.full - m.full) / std::max(m.full, std::numeric_limits<double>::min());
    }
  });
  fit.resolution_gap = *std::max_element(gaps.begin(), gaps.end());
  if (opts.resolution_check && fit.resolution_gap > opts.resolution_tol) {
    std::ostringstream os;
    os << "under-resolved ladder: C^" << opts.beta << " norms move by up to " << fit.resolution_gap * 100.0
       << "% on the 2h mesh";
    throw UnderResolvedError(os.str());
  }

  const GridFunction f_mesh = GridFunction::sample(op.dim(), traj.initial().radius(), opts.h, f);
  fit.norm_f = fractional_norm(f_mesh, opts.alpha, opts.r_eval, opts.norms).value;

  const LogLogFit full = fit_power_law(ladder, fit.norms);
  fit.exponent = -full.slope;
  fit.constant = std::exp(full.intercept);
  fit.residual = full.residual;
  const bool top_positive = std::all_of(fit.top.begin(), fit.top.end(), [](double v) { return v > 0.0; });
  if (top_positive) {
    const LogLogFit top = fit_power_law(ladder, fit.top);
    fit.top_exponent = -top.slope;
    fit.top_constant = std::exp(top.intercept);
  }
  return fit;
}

ScalarJet cutoff_eta_jet(double n, const Point& x, int order) {
  const auto psi = cutoff_profile(x.norm() / n);
  const std::array<double, 4> g{psi[0], psi[1] / n, psi[2] / (n * n), psi[3] / (n * n * n)};
  return radial_jet(x, g, order);
}

GridFunction cutoff_eta(double n, const GridFunction& like) {
  if (!(n > 0.0)) throw std::invalid_argument("cutoff radius must be positive");
  return GridFunction::sample_like(like, [n](const Point& x) { return cutoff_profile(x.norm() / n)[0]; });
}

double default_bernstein_weight(const OperatorSpec& op) {
  const double t = op.horizon();
  return 0.01 * std::min(1.0, op.nu0) / (1.0 + t * t * t);
}

namespace {

double binomial(int m, int a) {
  double r = 1.0;
  for (int i = 1; i <= a; ++i) r = r * (m - a + i) / i;
  return r;
}

}  // namespace

BernsteinMonitor bernstein_monitor(const OperatorSpec& op, const Datum& f, const BernsteinOptions& opts) {
  if (!(opts.n > 0.0)) throw std::invalid_argument("cutoff radius must be positive");
  BernsteinMonitor mon;
  mon.a = opts.a > 0.0 ? opts.a : default_bernstein_weight(op);
  mon.n = opts.n;
  const double horizon = op.horizon();
  mon.c1 = 2.0 * op.c0 + horizon * (1.0 + horizon + horizon * horizon);

  DirichletProblem p;
  p.op = op;
  p.radius = opts.n;
  p.h = opts.h;
  p.tau = opts.tau;
  p.s = opts.s;
  p.t_end = opts.t_end;
  p.output_times = opts.output_times;
  const double n = opts.n;
  p.f = [f, n](const Point& x) { return cutoff_profile(x.norm() / n)[0] * f(x); };
  const Trajectory traj = solve_dirichlet(p, opts.scheme);
  mon.eta_f_sup = traj.initial().values().cwiseAbs().maxCoeff();

  const int dim = op.dim();
  const GridFunction eta = cutoff_eta(n, traj.initial());
  std::vector<BernsteinFrame> frames(traj.size());
  std::vector<double> min_v(traj.size(), 0.0);
  parallel_tasks(traj.size(), [&](std::size_t m) {
    const GridFunction& u = traj.frames[m];
    const double el = traj.times[m] - opts.s;
    std::array<std::vector<std::pair<GridFunction, double>>, 4> d;
    for (int ord = 1; ord <= 3; ++ord)
      for (const auto& beta : multi_indices(dim, ord))
        d[static_cast<std::size_t>(ord)].emplace_back(derivative(u, beta), binomial(ord, beta[0]));
    const std::array<double, 4> weight{1.0, mon.a * el, std::pow(mon.a * el, 2), std::pow(mon.a * el, 3)};
    double sup_v = 0.0, lo = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      if (!u.in_ball(k)) continue;
      double v = u[k] * u[k];
      bool interior = true;
      for (int ord = 1; ord <= 3 && interior; ++ord)
        for (const auto& [g, mult] : d[static_cast<std::size_t>(ord)]) interior = interior && g.valid(k);
      if (interior && el > 0.0) {
        double e2 = 1.0;
        for (int ord = 1; ord <= 3; ++ord) {
          e2 *= eta[k] * eta[k];
          double sq = 0.0;
          for (const auto& [g, mult] : d[static_cast<std::size_t>(ord)]) sq += mult * g[k] * g[k];
          v += weight[static_cast<std::size_t>(ord)] * e2 * sq;
        }
      }
      sup_v = std::max(sup_v, std::abs(v));
      lo = std::min(lo, v);
    }
    BernsteinFrame fr;
    fr.t = traj.times[m];
    fr.sup_v = sup_v;
    fr.bound = std::exp(mon.c1 * el) * mon.eta_f_sup * mon.eta_f_sup;
    fr.ratio = fr.bound > 0.0 ? sup_v / fr.bound : (sup_v > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    frames[m] = fr;
    min_v[m] = lo;
  });
  mon.frames = std::move(frames);
  for (const auto& fr : mon.frames) mon.max_ratio = std::max(mon.max_ratio, fr.ratio);
  mon.min_v = *std::min_element(min_v.begin(), min_v.end());

  // Third-derivative reconstruction against the 2h mesh on the last frame.
  const GridFunction& last = traj.final();
  if ((last.points_per_axis() - 1) % 2 == 0) {
    const GridFunction coarse = last.coarsen();
    const double r_cmp = 0.5 * n;
    double fine_sup = 0.0, coarse_sup = 0.0;
    for (const auto& beta : multi_indices(dim, 3)) {
      const GridFunction df = derivative(last, beta), dc = derivative(coarse, beta);
      if (r_cmp > df.valid_radius() || r_cmp > dc.valid_radius()) continue;
      fine_sup = std::max(fine_sup, sup_norm(df, r_cmp));
      coarse_sup = std::max(coarse_sup, sup_norm(dc, r_cmp));
    }
    const double scale = std::max(fine_sup, 1e-12 * std::max(1.0, mon.eta_f_sup));
    mon.derivative_noise = std::abs(fine_sup - coarse_sup) > 0.1 * scale;
  }
  return mon;
}

}  // namespace schauder
