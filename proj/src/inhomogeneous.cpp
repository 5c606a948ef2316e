#include "schauder/inhomogeneous.hpp"

#include "schauder/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace schauder {

namespace {

GridFunction sample_source(const Source& g, double t, const GridFunction& like) {
  return GridFunction::sample_like(like, [&](const Point& x) { return evaluate_source(g, t, x); });
}

std::size_t total_steps(const DirichletProblem& p) {
  const double steps = std::round((p.t_end - p.s) / p.tau);
  if (std::abs(steps * p.tau - (p.t_end - p.s)) > 1e-9 * std::max(1.0, p.t_end - p.s))
    throw std::invalid_argument("(T - s) / tau must be an integer");
  return static_cast<std::size_t>(steps);
}

// A u + g on the nodes of B(0, r_eval); other nodes hold 0.
GridFunction forced_integrand(const OperatorSpec& op, const Source& g, double t, const GridFunction& u, double r_eval) {
  const int n = u.dim();
  std::vector<GridFunction> d1, d2;
  for (int i = 0; i < n; ++i) d1.push_back(derivative(u, i == 0 ? MultiIndex{1, 0} : MultiIndex{0, 1}));
  for (const auto& beta : multi_indices(n, 2)) d2.push_back(derivative(u, beta));
  GridFunction out(n, u.radius(), u.step(), d2.front().margin());
  if (r_eval > out.valid_radius() + 1e-9 * u.radius())
    throw std::invalid_argument("metering radius exceeds the derivative-valid region");
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const Point x = u.point(k);
    if (x.norm() > r_eval * (1.0 + 1e-12)) continue;
    const CoefficientSample s = op.evaluate(t, x, 0);
    double acc = s.c.value * u[k] + evaluate_source(g, t, x);
    for (int i = 0; i < n; ++i) acc += s.b[i].value * d1[static_cast<std::size_t>(i)][k];
    if (n == 1) {
      acc += s.q[0][0].value * d2[0][k];
    } else {
      acc += s.q[0][0].value * d2[0][k] + 2.0 * s.q[0][1].value * d2[1][k] + s.q[1][1].value * d2[2][k];
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

void record_data_norms(ForcedProblem& p, const NormOptions& opts) {
  if (!(p.theta > 0.0 && p.theta < 1.0)) throw std::invalid_argument("theta must lie in (0, 1)");
  const DirichletProblem& b = p.base;
  const GridFunction f = GridFunction::sample(b.op.dim(), b.radius, b.h, b.f);
  p.norm_f = ck_alpha_norm(f, 2, p.theta, p.r_eval, opts).value;
  p.norm_g = 0.0;
  if (b.g.empty()) return;
  std::set<double> times(b.output_times.begin(), b.output_times.end());
  const int m = 32;
  for (int k = 0; k <= m; ++k) times.insert(b.s + (b.t_end - b.s) * k / m);
  for (const double t : times)
    p.norm_g = std::max(p.norm_g, ck_alpha_norm(sample_source(b.g, t, f), 0, p.theta, p.r_eval, opts).value);
}

ExpandingBallResult solve_forced(const ForcedProblem& p, const ExpandingBallOptions& opts) {
  return expanding_ball_solve(p.base, opts);
}

VocResult voc_solution(const ForcedProblem& p, const VocOptions& opts) {
  const DirichletProblem& b = p.base;
  if (opts.nodes_per_unit < 16.0) throw std::invalid_argument("quadrature needs at least 16 nodes per unit time");
  const std::size_t steps = total_steps(b);
  // Largest stride dividing the step count with stride * tau <= 1 / nodes_per_unit.
  std::size_t stride = 1;
  for (std::size_t k = 1; k <= steps; ++k)
    if (steps % k == 0 && static_cast<double>(k) * b.tau <= 1.0 / opts.nodes_per_unit + 1e-12) stride = k;
  const std::size_t m = std::max<std::size_t>(1, steps / stride);
  const double dq = static_cast<double>(stride) * b.tau;

  std::vector<double> outputs = b.output_times;
  if (outputs.empty())
    for (std::size_t j = 0; j <= m; ++j) outputs.push_back(b.s + static_cast<double>(j) * dq);
  std::sort(outputs.begin(), outputs.end());
  for (const double t : outputs) {
    const double k = (t - b.s) / b.tau;
    if (std::abs(k - std::round(k)) > 1e-6) throw std::invalid_argument("output times must lie on the time-step grid");
  }

  const std::size_t n_sources = b.g.empty() ? 0 : m;  // nodes r_0 .. r_{m-1}; r_m = T needs no solve
  const std::size_t solves = 1 + n_sources;
  if (solves > opts.budget)
    throw BudgetError("variation-of-constants needs " + std::to_string(solves) + " solves, budget is " +
                      std::to_string(opts.budget));

  std::vector<Trajectory> runs(solves);
  parallel_tasks(solves, [&](std::size_t j) {
    DirichletProblem q = b;
    q.g.clear();
    if (j == 0) {
      q.output_times = outputs;
    } else {
      const double r = b.s + static_cast<double>(j - 1) * dq;
      q.s = r;
      q.f = [g = b.g, r](const Point& x) { return evaluate_source(g, r, x); };
      q.output_times.clear();
      for (const double t : outputs)
        if (t >= r - 1e-12) q.output_times.push_back(t);
    }
    runs[j] = solve_dirichlet(q, opts.scheme);
  });

  VocResult res;
  res.quad_step = dq;
  res.solves = solves;
  Trajectory& traj = res.trajectory;
  traj.provenance = runs[0].provenance;
  traj.provenance["method"] = "variation_of_constants";
  traj.provenance["quad_step"] = dq;
  for (const double t : outputs) {
    GridFunction u = runs[0].at(t, 1e-9 + 1e-6 * b.tau);
    if (!b.g.empty() && t > b.s) {
      // Quadrature nodes r_0 .. r_L <= t, plus t itself when it falls inside a panel.
      std::vector<double> nodes;
      std::vector<const GridFunction*> vals;
      std::vector<GridFunction> endpoint;
      endpoint.reserve(1);
      for (std::size_t j = 0; j < m; ++j) {
        const double r = b.s + static_cast<double>(j) * dq;
        if (r > t + 1e-12) break;
        if (std::abs(r - t) <= 1e-12) break;
        nodes.push_back(r);
        vals.push_back(&runs[j + 1].at(t, 1e-9 + 1e-6 * b.tau));
      }
      endpoint.push_back(sample_source(b.g, t, u));
      nodes.push_back(t);
      vals.push_back(&endpoint.back());
      const std::size_t l = nodes.size();
      for (std::size_t i = 0; i < l; ++i) {
        const double left = i > 0 ? nodes[i] - nodes[i - 1] : 0.0;
        const double right = i + 1 < l ? nodes[i + 1] - nodes[i] : 0.0;
        u.values() += 0.5 * (left + right) * vals[i]->values();
      }
    }
    traj.times.push_back(t);
    traj.frames.push_back(std::move(u));
  }
  return res;
}

SchauderRatio schauder_ratio(const ForcedProblem& p, const Trajectory& traj, const NormOptions& opts) {
  ForcedProblem data = p;
  if (data.norm_f < 0.0 || data.norm_g < 0.0) record_data_norms(data, opts);
  SchauderRatio out;
  out.norm_f = data.norm_f;
  out.norm_g = data.norm_g;
  const double denom = data.norm_f + data.norm_g;
  if (denom == 0.0) return out;
  std::vector<double> norms(traj.size());
  parallel_tasks(traj.size(), [&](std::size_t k) {
    norms[k] = ck_alpha_norm(traj.frames[k], 2, data.theta, data.r_eval, opts).value;
  });
  out.sup_norm_u = *std::max_element(norms.begin(), norms.end());
  out.ratio = out.sup_norm_u / denom;
  return out;
}

double integral_identity_residual(const Trajectory& traj, const OperatorSpec& op, const Source& g,
                                  const ResidualOptions& opts) {
  if (traj.size() < 2) return 0.0;
  const GridFunction& f = traj.initial();
  std::vector<GridFunction> integrand(traj.size());
  parallel_tasks(traj.size(), [&](std::size_t k) {
    integrand[k] = forced_integrand(op, g, traj.times[k], traj.frames[k], opts.r_eval);
  });
  std::vector<Eigen::Index> meter;
  for (Eigen::Index k = 0; k < f.size(); ++k)
    if (f.point(k).norm() <= opts.r_eval * (1.0 + 1e-12)) meter.push_back(k);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.size());
  double worst = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const double dt = traj.times[k] - traj.times[k - 1];
    acc += 0.5 * dt * (integrand[k - 1].values() + integrand[k].values());
    const bool excluded = std::any_of(opts.excluded_times.begin(), opts.excluded_times.end(),
                                      [&](double tj) { return std::abs(tj - traj.times[k]) <= opts.exclusion_tol; });
    if (excluded) continue;
    for (const Eigen::Index m : meter)
      worst = std::max(worst, std::abs(traj.frames[k][m] - f[m] - acc[m]));
  }
  return worst;
}

}  // namespace schauder
