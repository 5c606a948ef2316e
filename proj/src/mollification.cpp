#include "schauder/mollification.hpp"

#include "schauder/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace schauder {

namespace {

constexpr std::array<double, 8> kGlNodes{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                         -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                         0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights{0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                           0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                           0.2223810344533745, 0.1012285362903763};

// Kernel mass over [a, b] (clipped to [0, T]).
double piece_mass(double n, double t, double a, double b) {
  if (b <= a) return 0.0;
  const double s = std::sqrt(n) / 2.0;
  return 0.5 * (std::erf(s * (b - t)) - std::erf(s * (a - t)));
}

// Piecewise-constant mollification: pieces [0, j1), [j1, j2), ..., [jm, T].
template <class ValueAt>
double piecewise_exact(const std::vector<double>& jumps, ValueAt&& value_at, double n, double t, double horizon) {
  double acc = 0.0;
  double a = 0.0;
  for (std::size_t k = 0; k <= jumps.size(); ++k) {
    const double b = k < jumps.size() ? std::min(jumps[k], horizon) : horizon;
    if (b > a) acc += value_at(0.5 * (a + b)) * piece_mass(n, t, a, b);
    a = std::max(a, b);
    if (a >= horizon) break;
  }
  return acc;
}

std::vector<double> sorted_inside(const std::vector<double>& v, double horizon) {
  std::set<double> s;
  for (const double x : v)
    if (x > 0.0 && x < horizon) s.insert(x);
  return {s.begin(), s.end()};
}

bool all_piecewise_constant(const OperatorSpec& op) {
  return std::all_of(op.terms().begin(), op.terms().end(),
                     [](const CoefficientTerm& t) { return t.profile.is_piecewise_constant(); });
}

}  // namespace

double kernel_mass(double n, double t, double horizon) { return piece_mass(n, t, 0.0, horizon); }

double gaussian_mollify(const std::function<double(double)>& h, const std::vector<double>& breakpoints, double n,
                        double t, double horizon) {
  if (n < 1.0) throw std::invalid_argument("mollification index must be >= 1");
  const double sigma = std::sqrt(2.0 / n);
  const double lo = std::max(0.0, t - 12.0 * sigma);
  const double hi = std::min(horizon, t + 12.0 * sigma);
  if (hi <= lo) return 0.0;
  const double width = std::sqrt(4.0 / n) / 10.0;
  const double norm = std::sqrt(n / (4.0 * M_PI));
  std::vector<double> cuts{lo};
  for (const double b : breakpoints)
    if (b > lo && b < hi) cuts.push_back(b);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    if (b <= a) continue;
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / width)));
    const double w = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
      const double mid = a + (p + 0.5) * w;
      for (std::size_t g = 0; g < kGlNodes.size(); ++g) {
        const double tau = mid + 0.5 * w * kGlNodes[g];
        const double d = t - tau;
        acc += 0.5 * w * kGlWeights[g] * h(tau) * std::exp(-0.25 * n * d * d);
      }
    }
  }
  return norm * acc;
}

double gaussian_mollify(const TimeProfile& h, double n, double t, double horizon) {
  if (n < 1.0) throw std::invalid_argument("mollification index must be >= 1");
  const auto& repr = h.repr();
  if (const auto* c = std::get_if<TimeProfile::Constant>(&repr)) return c->value * kernel_mass(n, t, horizon);
  if (const auto* p = std::get_if<TimeProfile::PiecewiseConstant>(&repr)) {
    double acc = 0.0;
    double a = 0.0;
    for (std::size_t k = 0; k < p->values.size(); ++k) {
      const double b = k < p->jumps.size() ? std::min(std::max(p->jumps[k], 0.0), horizon) : horizon;
      if (b > a) acc += p->values[k] * piece_mass(n, t, a, b);
      a = std::max(a, b);
    }
    return acc;
  }
  return gaussian_mollify([&h](double tau) { return h(tau); }, h.breakpoints(), n, t, horizon);
}

double nu_floor(double nu0, double horizon) { return 0.5 * nu0 * std::erf(horizon / 4.0); }

// ---------------------------------------------------------------------------

MollifiedOperator::MollifiedOperator(OperatorSpec source, double n) : source_(std::move(source)), n_(n) {
  if (n < 1.0) throw std::invalid_argument("mollification index must be >= 1");
  const double horizon = source_.horizon();
  std::vector<CoefficientTerm> terms = source_.terms();
  std::vector<double> all;
  for (auto& term : terms) {
    for (const double b : term.profile.breakpoints()) all.push_back(b);
    term.profile = TimeProfile::mollified(term.profile, n, horizon);
  }
  breaks_ = sorted_inside(all, horizon);
  op_ = OperatorSpec(source_.dim(), horizon, std::move(terms));
  // Smallest kernel mass on [0, T] is at the endpoints.
  const double mass_min = kernel_mass(n, 0.0, horizon);
  op_.nu0 = source_.nu0 * mass_min;
  op_.c0 = source_.c0 >= 0.0 ? source_.c0 : source_.c0 * mass_min;
  op_.lyapunov = source_.lyapunov;
  op_.name = source_.name + "_mollified";
  op_.source = source_.source;
  if (!op_.source.is_null()) op_.source["mollification_index"] = n;
}

double MollifiedOperator::mollify_pointwise(const std::function<double(double)>& fn, double t) const {
  if (all_piecewise_constant(source_)) return piecewise_exact(breaks_, fn, n_, t, source_.horizon());
  return gaussian_mollify(fn, breaks_, n_, t, source_.horizon());
}

double MollifiedOperator::nu_n(double t, const Point& x) const {
  return mollify_pointwise([&](double tau) { return ellipticity(source_, tau, x); }, t);
}

double MollifiedOperator::d_n(double t, const Point& x) const {
  return mollify_pointwise([&](double tau) { return dissipativity_bound(source_, tau, x); }, t);
}

double MollifiedOperator::r_n(double t, const Point& x) const {
  return mollify_pointwise([&](double tau) { return drift_derivative_bound(source_.evaluate(tau, x, 3)); }, t);
}

double MollifiedOperator::rho_n(double t, const Point& x, double rho_floor) const {
  return mollify_pointwise(
      [&](double tau) { return std::max(potential_derivative_bound(source_.evaluate(tau, x, 3)), rho_floor); }, t);
}

double MollifiedOperator::rho2_n(double t, const Point& x, double rho_floor) const {
  return mollify_pointwise(
      [&](double tau) {
        const double r = std::max(potential_derivative_bound(source_.evaluate(tau, x, 3)), rho_floor);
        return r * r;
      },
      t);
}

Source mollify_source(const Source& g, double n, double horizon) {
  Source out = g;
  for (auto& term : out) term.profile = TimeProfile::mollified(term.profile, n, horizon);
  return out;
}

double jensen_gap(const TimeProfile& h, double n, double t, double horizon) {
  const double first = gaussian_mollify(h, n, t, horizon);
  double second = 0.0;
  if (const auto* p = std::get_if<TimeProfile::PiecewiseConstant>(&h.repr())) {
    std::vector<double> sq = p->values;
    for (auto& v : sq) v *= v;
    second = gaussian_mollify(TimeProfile::piecewise_constant(p->jumps, sq), n, t, horizon);
  } else {
    second = gaussian_mollify([&h](double tau) { return h(tau) * h(tau); }, h.breakpoints(), n, t, horizon);
  }
  return second - first * first;
}

PreservationReport hypothesis_preservation_check(const OperatorSpec& source, const CompatConstants& k,
                                                 const std::vector<double>& n_ladder, double box_radius, int samples,
                                                 std::uint64_t seed) {
  PreservationReport rep;
  const int dim = source.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<std::pair<double, Point>> pts;
  while (static_cast<int>(pts.size()) < samples) {
    Point x(dim);
    for (int i = 0; i < dim; ++i) x[i] = box_radius * unit(rng);
    if (x.norm() > box_radius) continue;
    const double t = 0.5 * source.horizon() * (1.0 + unit(rng));
    pts.emplace_back(t, x);
  }
  const double floor = nu_floor(source.nu0, source.horizon());
  for (const double n : n_ladder) {
    const MollifiedOperator m(source, n);
    PreservationRow row;
    row.n = n;
    row.compat_margin = row.jensen_margin = row.nu_floor_margin = std::numeric_limits<double>::infinity();
    row.worst_x = Point::Zero(dim);
    std::vector<std::array<double, 3>> margins(pts.size());
    parallel_tasks(pts.size(), [&](std::size_t s) {
      const auto& [t, x] = pts[s];
      const double nu = m.nu_n(t, x);
      const double rho = m.rho_n(t, x, k.rho_floor);
      const double rho2 = m.rho2_n(t, x, k.rho_floor);
      const double lhs = m.d_n(t, x) + k.l1 * m.r_n(t, x) + k.l2 * rho2;
      margins[s] = {k.l3 * nu - lhs, rho2 - rho * rho, nu - floor};
    });
    for (std::size_t s = 0; s < pts.size(); ++s) {
      if (margins[s][0] < row.compat_margin) {
        row.compat_margin = margins[s][0];
        row.worst_t = pts[s].first;
        row.worst_x = pts[s].second;
      }
      row.jensen_margin = std::min(row.jensen_margin, margins[s][1]);
      row.nu_floor_margin = std::min(row.nu_floor_margin, margins[s][2]);
    }
    row.pass = row.compat_margin >= -1e-10 && row.jensen_margin >= -1e-10 && row.nu_floor_margin >= -1e-8;
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------

DiscontinuousResult solve_discontinuous(const DirichletProblem& base, const DiscontinuousOptions& opts) {
  if (opts.n_ladder.empty()) throw std::invalid_argument("mollification ladder is empty");
  const double horizon = base.op.horizon();
  std::vector<Trajectory> runs(opts.n_ladder.size());
  ExpandingBallOptions ball = opts.ball;
  ball.scheme = opts.scheme;
  parallel_tasks(opts.n_ladder.size(), [&](std::size_t k) {
    const MollifiedOperator m(base.op, opts.n_ladder[k]);
    DirichletProblem q = base;
    q.op = m.op();
    q.g = mollify_source(base.g, opts.n_ladder[k], horizon);
    q.output_times.clear();
    runs[k] = expanding_ball_solve(q, ball).trajectory;
    runs[k].provenance["mollification_index"] = opts.n_ladder[k];
  });

  std::vector<double> excluded = base.op.jumps();
  for (const double j : source_jumps(base.g)) excluded.push_back(j);

  DiscontinuousResult res;
  ResidualOptions ropts;
  ropts.r_eval = opts.r_eval;
  ropts.excluded_times = excluded;
  ropts.exclusion_tol = 0.5 * base.tau;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    DiscontinuousRow row;
    row.n = opts.n_ladder[k];
    row.residual = integral_identity_residual(runs[k], base.op, base.g, ropts);
    if (k > 0) {
      const Trajectory& a = runs[k - 1];
      const Trajectory& b = runs[k];
      // Members may have converged on different balls: compare on the smaller one.
      const double r = std::min(a.initial().radius(), b.initial().radius());
      for (std::size_t m = 0; m < std::min(a.size(), b.size()); ++m) {
        const GridFunction diff = b.frames[m].restrict_to(r) - a.frames[m].restrict_to(r);
        row.increment_sup = std::max(row.increment_sup, sup_norm(diff, opts.r_eval));
        for (const auto& beta : multi_indices(diff.dim(), 1))
          row.increment_grad = std::max(row.increment_grad, sup_norm(derivative(diff, beta), opts.r_eval));
        for (const auto& beta : multi_indices(diff.dim(), 2))
          row.increment_hess = std::max(row.increment_hess, sup_norm(derivative(diff, beta), opts.r_eval));
      }
    }
    res.rows.push_back(row);
  }
  res.converged = runs.size() < 2 || res.rows.back().increment_sup <= opts.tol;
  res.trajectory = std::move(runs.back());
  return res;
}

}  // namespace schauder
