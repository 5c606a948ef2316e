#include "schauder/operator_model.hpp"

#include "schauder/grid_function.hpp"
#include "schauder/holder_norms.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <set>

namespace schauder {

namespace {

double lambda_min(const SmallMatrix& m) {
  if (m.rows() == 1) return m(0, 0);
  const double tr = m(0, 0) + m(1, 1);
  const double diff = m(0, 0) - m(1, 1);
  return 0.5 * tr - 0.5 * std::sqrt(diff * diff + 4.0 * m(0, 1) * m(1, 0));
}

double lambda_max_sym(const SmallMatrix& m) {
  if (m.rows() == 1) return m(0, 0);
  const double tr = m(0, 0) + m(1, 1);
  const double diff = m(0, 0) - m(1, 1);
  const double off = 0.5 * (m(0, 1) + m(1, 0));
  return 0.5 * tr + 0.5 * std::sqrt(diff * diff + 4.0 * off * off);
}

// 4th-order central weights (offsets -hw..hw) and denominators per order.
struct FdRule {
  std::vector<double> w;
  double scale;
};

const FdRule& fd_rule(int order) {
  static const FdRule rules[4] = {
      {{1.0}, 1.0},
      {{1.0, -8.0, 0.0, 8.0, -1.0}, 12.0},
      {{-1.0, 16.0, -30.0, 16.0, -1.0}, 12.0},
      {{1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0}, 8.0},
  };
  return rules[order];
}

double fd_partial(const SpatialField& f, const Point& x, int a, int b, double h) {
  const FdRule& ra = fd_rule(a);
  const FdRule& rb = fd_rule(b);
  const int ha = static_cast<int>(ra.w.size() / 2);
  const int hb = static_cast<int>(rb.w.size() / 2);
  double acc = 0.0;
  Point y = x;
  for (int s = -ha; s <= ha; ++s) {
    const double wa = ra.w[static_cast<std::size_t>(s + ha)];
    if (wa == 0.0) continue;
    for (int r = -hb; r <= hb; ++r) {
      const double wb = rb.w[static_cast<std::size_t>(r + hb)];
      if (wb == 0.0) continue;
      y = x;
      y[0] += s * h;
      if (b > 0) y[1] += r * h;
      acc += wa * wb * f.eval(y, 0).value;
    }
  }
  return acc / (ra.scale * std::pow(h, a) * rb.scale * std::pow(h, b));
}

ScalarJet fd_jet(const SpatialField& f, const Point& x, int order, double h) {
  const int n = static_cast<int>(x.size());
  ScalarJet r(n, order);
  r.value = f.eval(x, 0).value;
  if (order == 0) return r;
  // counts of axis-0 and axis-1 derivatives for an index tuple
  auto partial = [&](int a, int b) { return fd_partial(f, x, a, b, h); };
  for (int i = 0; i < n; ++i) r.grad[i] = i == 0 ? partial(1, 0) : partial(0, 1);
  if (order >= 2)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const int b = (i == 1) + (j == 1);
        r.hess(i, j) = r.hess(j, i) = partial(2 - b, b);
      }
  if (order >= 3) {
    double cache[4];
    for (int b = 0; b < (n == 2 ? 4 : 1); ++b) cache[b] = partial(3 - b, b);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) r.third[i](j, k) = cache[(i == 1) + (j == 1) + (k == 1)];
  }
  return r;
}

SmallMatrix matrix_from_json(const nlohmann::json& j, int dim) {
  SmallMatrix m = SmallMatrix::Zero(dim, dim);
  if (j.is_number()) {
    m = j.get<double>() * SmallMatrix::Identity(dim, dim);
    return m;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != dim) throw std::invalid_argument("matrix has wrong shape");
  for (int i = 0; i < dim; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != dim) throw std::invalid_argument("matrix has wrong shape");
    for (int k = 0; k < dim; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

ScalarJet lyapunov_quadratic(const Point& x, int order) {
  ScalarJet phi = norm2_jet(x, order);
  phi.value += 1.0;
  return phi;
}

// 1D Lagrange basis of order 1 or 3 on a uniform grid, stencil clamped to the table.
void lagrange_weights(double x, double x_min, double x_max, int nodes, int order, int& first, double w[4]) {
  const double dx = (x_max - x_min) / (nodes - 1);
  const double xc = std::clamp(x, x_min, x_max);
  const double s = (xc - x_min) / dx;
  const int m = order + 1;
  int base = static_cast<int>(std::floor(s)) - (order == 3 ? 1 : 0);
  base = std::clamp(base, 0, nodes - m);
  first = base;
  for (int a = 0; a < m; ++a) {
    double l = 1.0;
    for (int b = 0; b < m; ++b)
      if (b != a) l *= (s - (base + b)) / static_cast<double>(a - b);
    w[a] = l;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Fields

namespace fields {

SpatialField constant(double v) {
  return {[v](const Point& x, int ord) { return ScalarJet::constant(static_cast<int>(x.size()), ord, v); }, true,
          "const"};
}

SpatialField poly_weight(int p) {
  return {[p](const Point& x, int ord) { return weight_power_jet(x, 1.0, p, ord); }, true,
          "(1+|x|^2)^" + std::to_string(p)};
}

SpatialField even_power(int r) {
  return {[r](const Point& x, int ord) { return weight_power_jet(x, 0.0, r, ord); }, true,
          "|x|^" + std::to_string(2 * r)};
}

SpatialField gaussian(double width) {
  const double s = -1.0 / (width * width);
  return {[s](const Point& x, int ord) {
            ScalarJet inner = norm2_jet(x, ord);
            inner *= s;
            const double e = std::exp(inner.value);
            return compose({e, e, e, e}, inner);
          },
          true, "gauss"};
}

SpatialField coordinate(int j) {
  return {[j](const Point& x, int ord) { return coordinate_jet(x, j, ord); }, true, "x" + std::to_string(j + 1)};
}

SpatialField product(SpatialField a, SpatialField b) {
  const bool analytic = a.analytic && b.analytic;
  std::string label = a.label + "*" + b.label;
  return {[a = std::move(a), b = std::move(b)](const Point& x, int ord) { return a.eval(x, ord) * b.eval(x, ord); },
          analytic, std::move(label)};
}

SpatialField sum(SpatialField a, SpatialField b) {
  const bool analytic = a.analytic && b.analytic;
  std::string label = a.label + "+" + b.label;
  return {[a = std::move(a), b = std::move(b)](const Point& x, int ord) { return a.eval(x, ord) + b.eval(x, ord); },
          analytic, std::move(label)};
}

SpatialField scaled(double scale, SpatialField a) {
  const bool analytic = a.analytic;
  std::string label = std::to_string(scale) + "*" + a.label;
  return {[scale, a = std::move(a)](const Point& x, int ord) { return scale * a.eval(x, ord); }, analytic,
          std::move(label)};
}

SpatialField sampled(std::function<double(const Point&)> fn, std::string label) {
  return {[fn = std::move(fn)](const Point& x, int) {
            ScalarJet j(static_cast<int>(x.size()), 0);
            j.value = fn(x);
            return j;
          },
          false, std::move(label)};
}

}  // namespace fields

// ---------------------------------------------------------------------------
// Samples and spec

CoefficientSample::CoefficientSample(int n, int ord) : dim(n), order(ord) {
  for (auto& row : q)
    for (auto& e : row) e = ScalarJet(n, ord);
  for (auto& e : b) e = ScalarJet(n, ord);
  c = ScalarJet(n, ord);
}

SmallMatrix CoefficientSample::diffusion() const {
  SmallMatrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = q[i][j].value;
  return m;
}

Point CoefficientSample::drift() const {
  Point v(dim);
  for (int i = 0; i < dim; ++i) v[i] = b[i].value;
  return v;
}

SmallMatrix CoefficientSample::drift_jacobian() const {
  SmallMatrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = b[i].grad[j];
  return m;
}

OperatorSpec::OperatorSpec(int dim, double horizon, std::vector<CoefficientTerm> terms)
    : dim_(dim), horizon_(horizon), terms_(std::move(terms)) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("operator dimension must be 1 or 2");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  for (const auto& t : terms_)
    if (t.i < 0 || t.i >= dim || t.j < 0 || t.j >= dim) throw std::invalid_argument("coefficient index out of range");
}

CoefficientSample OperatorSpec::evaluate(double t, const Point& x, int order, double fd_scale) const {
  if (x.size() != dim_) throw std::invalid_argument("point dimension does not match operator");
  CoefficientSample s(dim_, order);
  for (const auto& term : terms_) {
    const double w = term.profile(t);
    if (w == 0.0) continue;
    const ScalarJet jet = term.field.analytic || order == 0
                              ? term.field.eval(x, order)
                              : fd_jet(term.field, x, order, fd_scale * 1e-3 * (1.0 + x.norm()));
    switch (term.slot) {
      case CoefficientSlot::Diffusion:
        s.q[term.i][term.j].axpy(w, jet);
        if (term.i != term.j) s.q[term.j][term.i].axpy(w, jet);
        break;
      case CoefficientSlot::Drift:
        s.b[term.i].axpy(w, jet);
        break;
      case CoefficientSlot::Potential:
        s.c.axpy(w, jet);
        break;
    }
  }
  return s;
}

bool OperatorSpec::analytic() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const CoefficientTerm& t) { return t.field.analytic; });
}

bool OperatorSpec::time_independent() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const CoefficientTerm& t) { return t.profile.is_constant(); });
}

std::vector<double> OperatorSpec::jumps() const {
  std::set<double> all;
  for (const auto& t : terms_)
    for (const double j : t.profile.jumps()) all.insert(j);
  return {all.begin(), all.end()};
}

// ---------------------------------------------------------------------------
// Poly example family

Kappa3Fit fit_kappa3(const PolyExponents& e, double rho_max, int samples) {
  Kappa3Fit fit{-std::numeric_limits<double>::infinity(), 0.0};
  for (int k = 0; k < samples; ++k) {
    const double rho = rho_max * k / (samples - 1);
    const double r2 = rho * rho;
    const double w = 1.0 + r2;
    const double v = 2.0 * e.dim * e.q0_norm * std::pow(w, e.p) + 2.0 * e.b0_sup * r2 * std::pow(w, e.q) -
                     std::pow(r2, e.r) * w;
    if (v > fit.sup) fit = {v, rho};
  }
  return fit;
}

OperatorSpec build_poly_example_unchecked(const PolyExampleSpec& spec) {
  const int n = spec.dim;
  if (spec.p < 0 || spec.q < 0 || spec.r < 0) throw std::invalid_argument("exponents must be nonnegative");
  if (spec.q0_matrix.rows() != n || spec.q0_matrix.cols() != n) throw std::invalid_argument("Q0 has wrong shape");
  if (std::abs(spec.q0_modulation) >= 1.0) throw std::invalid_argument("Q0 modulation must satisfy |a| < 1");
  std::vector<CoefficientTerm> terms;
  SpatialField weight = fields::poly_weight(spec.p);
  if (spec.q0_modulation != 0.0)
    weight = fields::product(weight, fields::sum(fields::constant(1.0),
                                                 fields::scaled(spec.q0_modulation, fields::gaussian(1.0))));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double qij = 0.5 * (spec.q0_matrix(i, j) + spec.q0_matrix(j, i));
      if (qij == 0.0 && i != j) continue;
      terms.push_back({CoefficientSlot::Diffusion, i, j, spec.q0_profile, fields::scaled(qij, weight)});
    }
  for (int j = 0; j < n; ++j)
    terms.push_back({CoefficientSlot::Drift, j, j, spec.b0,
                     fields::product(fields::coordinate(j), fields::poly_weight(spec.q))});
  terms.push_back({CoefficientSlot::Potential, 0, 0, spec.c0_base, fields::constant(1.0)});
  if (spec.c0_bump != 0.0)
    terms.push_back({CoefficientSlot::Potential, 0, 0, TimeProfile::constant(spec.c0_bump), fields::gaussian(1.0)});
  terms.push_back({CoefficientSlot::Potential, 0, 0, TimeProfile::constant(-1.0), fields::even_power(spec.r)});

  OperatorSpec op(n, spec.horizon, std::move(terms));
  const double a = std::abs(spec.q0_modulation);
  const auto [q_lo, q_hi] = spec.q0_profile.range(spec.horizon);
  const SmallMatrix q0s = 0.5 * (spec.q0_matrix + spec.q0_matrix.transpose());
  PolyExponents e;
  e.dim = n;
  e.p = spec.p;
  e.q = spec.q;
  e.r = spec.r;
  e.q0_norm = std::max(std::abs(lambda_max_sym(q0s)), std::abs(lambda_min(q0s))) * std::max(std::abs(q_lo), std::abs(q_hi)) * (1.0 + a);
  e.b0_sup = spec.b0.range(spec.horizon).second;
  const auto [c_lo, c_hi] = spec.c0_base.range(spec.horizon);
  e.c0_sup = std::max(std::abs(c_lo), std::abs(c_hi)) + std::abs(spec.c0_bump);
  e.nu0 = lambda_min(q0s) * q_lo * (1.0 - a);
  // The sup is attained at moderate radii whenever p <= q and b0 < 0.
  const Kappa3Fit k3 = fit_kappa3(e, 64.0);
  e.kappa3 = std::max(1.1 * k3.sup, 1e-3);
  op.nu0 = e.nu0;
  op.c0 = c_hi + std::max(spec.c0_bump, 0.0) - (spec.r == 0 ? 1.0 : 0.0);
  op.poly = e;
  op.lyapunov = LyapunovPair{lyapunov_quadratic, e.c0_sup + e.kappa3, "1+|x|^2"};
  op.name = "poly_example";
  return op;
}

OperatorSpec build_poly_example(const PolyExampleSpec& spec) {
  if (spec.p > spec.q) throw std::invalid_argument("p ≤ q violated");
  const auto [b_lo, b_hi] = spec.b0.range(spec.horizon);
  (void)b_lo;
  if (!(b_hi < 0.0)) throw std::invalid_argument("b0 must be negative on [0, T]");
  for (const double j : spec.b0.jumps())
    if (j > 0.0 && j < spec.horizon && spec.regime == TimeRegime::Continuous)
      throw std::invalid_argument("continuous regime requires a continuous b0 profile");
  if (spec.regime == TimeRegime::Continuous)
    for (const auto* prof : {&spec.q0_profile, &spec.c0_base})
      if (!prof->jumps().empty()) throw std::invalid_argument("continuous regime requires continuous profiles");
  const auto [q_lo, q_hi] = spec.q0_profile.range(spec.horizon);
  (void)q_hi;
  if (!(q_lo > 0.0)) throw std::invalid_argument("Q0 time profile must be positive");
  const SmallMatrix q0s = 0.5 * (spec.q0_matrix + spec.q0_matrix.transpose());
  if (!(lambda_min(q0s) > 0.0)) throw std::invalid_argument("Q0 must be positive definite");
  return build_poly_example_unchecked(spec);
}

// ---------------------------------------------------------------------------
// Linear drift family

OperatorSpec build_linear_drift(const LinearDriftSpec& spec) {
  const int n = spec.dim;
  if (spec.q_matrix.rows() != n || spec.drift_matrix.rows() != n || spec.drift_offset.size() != n)
    throw std::invalid_argument("linear drift data has wrong shape");
  const SmallMatrix qs = 0.5 * (spec.q_matrix + spec.q_matrix.transpose());
  const auto [q_lo, q_hi] = spec.q_profile.range(spec.horizon);
  (void)q_hi;
  const double nu0 = lambda_min(qs) * q_lo;
  if (!(nu0 > 0.0)) throw std::invalid_argument("diffusion must be uniformly elliptic");
  std::vector<CoefficientTerm> terms;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      if (i != j && qs(i, j) == 0.0) continue;
      terms.push_back({CoefficientSlot::Diffusion, i, j, spec.q_profile, fields::constant(qs(i, j))});
    }
  for (int i = 0; i < n; ++i) {
    SpatialField f = fields::constant(spec.drift_offset[i]);
    for (int j = 0; j < n; ++j)
      if (spec.drift_matrix(i, j) != 0.0)
        f = fields::sum(f, fields::scaled(spec.drift_matrix(i, j), fields::coordinate(j)));
    terms.push_back({CoefficientSlot::Drift, i, i, spec.drift_profile, std::move(f)});
  }
  if (spec.potential != 0.0)
    terms.push_back({CoefficientSlot::Potential, 0, 0, spec.potential_profile, fields::constant(spec.potential)});
  OperatorSpec op(n, spec.horizon, std::move(terms));
  const auto [p_lo, p_hi] = spec.potential_profile.range(spec.horizon);
  op.nu0 = nu0;
  op.c0 = std::max(spec.potential * p_lo, spec.potential * p_hi);
  op.lyapunov = LyapunovPair{lyapunov_quadratic, spec.lyapunov_lambda.value_or(std::max(op.c0, 0.0) + 1.0), "1+|x|^2"};
  op.name = "linear_drift";
  return op;
}

// ---------------------------------------------------------------------------
// Tabulated family

OperatorSpec build_tabulated(const TabulatedSpec& spec) {
  const int n = spec.dim;
  const std::size_t slots = n == 1 ? 3 : 6;
  if (spec.interpolation != 1 && spec.interpolation != 3) throw std::invalid_argument("interpolation order must be 1 or 3");
  if (spec.nodes < spec.interpolation + 1) throw std::invalid_argument("too few tabulation nodes");
  if (spec.times.empty()) throw std::invalid_argument("tabulated operator needs at least one time");
  if (!(spec.x_max > spec.x_min)) throw std::invalid_argument("tabulation box is empty");
  if (spec.values.size() != slots) throw std::invalid_argument("tabulated operator has wrong number of slots");
  const std::size_t per_time = n == 1 ? static_cast<std::size_t>(spec.nodes)
                                      : static_cast<std::size_t>(spec.nodes) * static_cast<std::size_t>(spec.nodes);
  for (const auto& slot : spec.values) {
    if (slot.size() != spec.times.size()) throw std::invalid_argument("tabulated slot has wrong number of times");
    for (const auto& frame : slot)
      if (frame.size() != per_time) throw std::invalid_argument("tabulated frame has wrong number of nodes");
  }

  auto interpolant = [&spec, n](std::vector<double> table) {
    return [table = std::move(table), x_min = spec.x_min, x_max = spec.x_max, nodes = spec.nodes,
            order = spec.interpolation, n](const Point& x) {
      int f0 = 0, f1 = 0;
      double w0[4] = {}, w1[4] = {1.0, 0.0, 0.0, 0.0};
      lagrange_weights(x[0], x_min, x_max, nodes, order, f0, w0);
      if (n == 2) lagrange_weights(x[1], x_min, x_max, nodes, order, f1, w1);
      double acc = 0.0;
      for (int b = 0; b < (n == 2 ? order + 1 : 1); ++b)
        for (int a = 0; a <= order; ++a)
          acc += w0[a] * w1[b] * table[static_cast<std::size_t>((f1 + b) * (n == 2 ? nodes : 0) + f0 + a)];
      return acc;
    };
  };

  // slot -> (coefficient slot, i, j)
  std::vector<std::tuple<CoefficientSlot, int, int>> layout;
  if (n == 1) {
    layout = {{CoefficientSlot::Diffusion, 0, 0}, {CoefficientSlot::Drift, 0, 0}, {CoefficientSlot::Potential, 0, 0}};
  } else {
    layout = {{CoefficientSlot::Diffusion, 0, 0}, {CoefficientSlot::Diffusion, 0, 1}, {CoefficientSlot::Diffusion, 1, 1},
              {CoefficientSlot::Drift, 0, 0},     {CoefficientSlot::Drift, 1, 1},     {CoefficientSlot::Potential, 0, 0}};
  }
  const std::size_t nt = spec.times.size();
  std::vector<CoefficientTerm> terms;
  for (std::size_t s = 0; s < slots; ++s) {
    const auto [slot, i, j] = layout[s];
    for (std::size_t k = 0; k < nt; ++k) {
      TimeProfile hat = TimeProfile::constant(1.0);
      if (nt > 1) {
        std::vector<double> vals(nt, 0.0);
        vals[k] = 1.0;
        hat = TimeProfile::piecewise_linear(spec.times, vals);
      }
      terms.push_back({slot, i, j, hat,
                       fields::sampled(interpolant(spec.values[s][k]), "table" + std::to_string(s))});
    }
  }
  OperatorSpec op(n, spec.horizon, std::move(terms));
  double nu0 = std::numeric_limits<double>::infinity();
  double c0 = -std::numeric_limits<double>::infinity();
  double bsup = 0.0;
  for (std::size_t k = 0; k < nt; ++k)
    for (std::size_t m = 0; m < per_time; ++m) {
      SmallMatrix q(n, n);
      if (n == 1) {
        q(0, 0) = spec.values[0][k][m];
        bsup = std::max(bsup, std::abs(spec.values[1][k][m]));
        c0 = std::max(c0, spec.values[2][k][m]);
      } else {
        q << spec.values[0][k][m], spec.values[1][k][m], spec.values[1][k][m], spec.values[2][k][m];
        bsup = std::max({bsup, std::abs(spec.values[3][k][m]), std::abs(spec.values[4][k][m])});
        c0 = std::max(c0, spec.values[5][k][m]);
      }
      nu0 = std::min(nu0, lambda_min(q));
    }
  // Cubic interpolation can overshoot the table; the floor is then only nominal.
  op.nu0 = nu0;
  op.c0 = c0;
  op.lyapunov = LyapunovPair{lyapunov_quadratic, std::max(c0, 0.0) + 2.0 * n * bsup + 1.0, "1+|x|^2"};
  op.name = "custom_tabulated";
  return op;
}

// ---------------------------------------------------------------------------
// JSON loading

OperatorSpec operator_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("operator definition must be a JSON object");
  const std::string family = j.at("family").get<std::string>();
  const int n = j.value("N", 1);
  const double horizon = j.value("T", 1.0);
  OperatorSpec op;
  if (family == "poly_example") {
    PolyExampleSpec s;
    s.dim = n;
    s.horizon = horizon;
    s.p = j.value("p", 0);
    s.q = j.value("q", 0);
    s.r = j.value("r", 0);
    s.q0_matrix = SmallMatrix::Identity(n, n);
    if (j.contains("Q0")) {
      const auto& q0 = j.at("Q0");
      if (q0.is_object()) {
        if (q0.contains("matrix")) s.q0_matrix = matrix_from_json(q0.at("matrix"), n);
        if (q0.contains("profile")) s.q0_profile = TimeProfile::from_json(q0.at("profile"));
        s.q0_modulation = q0.value("modulation", 0.0);
      } else {
        s.q0_matrix = matrix_from_json(q0, n);
      }
    }
    if (j.contains("b0")) s.b0 = TimeProfile::from_json(j.at("b0"));
    if (j.contains("c0")) s.c0_base = TimeProfile::from_json(j.at("c0"));
    s.c0_bump = j.value("c0_bump", 0.0);
    const bool jumpy = !s.b0.jumps().empty() || !s.q0_profile.jumps().empty() || !s.c0_base.jumps().empty();
    const std::string regime = j.value("regime", jumpy ? "measurable" : "continuous");
    if (regime == "continuous") {
      s.regime = TimeRegime::Continuous;
    } else if (regime == "measurable") {
      s.regime = TimeRegime::Measurable;
    } else {
      throw std::invalid_argument("unknown regime: " + regime);
    }
    op = j.value("unchecked", false) ? build_poly_example_unchecked(s) : build_poly_example(s);
  } else if (family == "linear_drift") {
    LinearDriftSpec s;
    s.dim = n;
    s.horizon = horizon;
    s.q_matrix = matrix_from_json(j.value("Q", nlohmann::json(1.0)), n);
    if (j.contains("Q_profile")) s.q_profile = TimeProfile::from_json(j.at("Q_profile"));
    s.drift_matrix = matrix_from_json(j.value("B", nlohmann::json(0.0)), n);
    s.drift_offset = Point::Zero(n);
    if (j.contains("v")) {
      const auto v = j.at("v").get<std::vector<double>>();
      if (static_cast<int>(v.size()) != n) throw std::invalid_argument("drift offset has wrong length");
      for (int i = 0; i < n; ++i) s.drift_offset[i] = v[static_cast<std::size_t>(i)];
    }
    if (j.contains("b_profile")) s.drift_profile = TimeProfile::from_json(j.at("b_profile"));
    s.potential = j.value("c", 0.0);
    if (j.contains("c_profile")) s.potential_profile = TimeProfile::from_json(j.at("c_profile"));
    if (j.contains("lambda")) s.lyapunov_lambda = j.at("lambda").get<double>();
    op = build_linear_drift(s);
  } else if (family == "custom_tabulated") {
    TabulatedSpec s;
    s.dim = n;
    s.horizon = horizon;
    s.times = j.value("times", std::vector<double>{0.0});
    s.x_min = j.at("x_min").get<double>();
    s.x_max = j.at("x_max").get<double>();
    s.nodes = j.at("nodes").get<int>();
    s.interpolation = j.value("interpolation", 1);
    s.values = j.at("values").get<std::vector<std::vector<std::vector<double>>>>();
    op = build_tabulated(s);
  } else {
    throw std::invalid_argument("unknown operator family: " + family);
  }
  op.name = j.value("name", family);
  op.source = j;
  return op;
}

// ---------------------------------------------------------------------------
// Pointwise quantities

double ellipticity(const OperatorSpec& op, double t, const Point& x) {
  return lambda_min(op.evaluate(t, x, 0).diffusion());
}

double dissipativity_bound(const OperatorSpec& op, double t, const Point& x) {
  return lambda_max_sym(op.evaluate(t, x, 1).drift_jacobian());
}

double drift_derivative_bound(const CoefficientSample& s) {
  double m = 0.0;
  for (int j = 0; j < s.dim; ++j) {
    m = std::max(m, s.b[j].hess.cwiseAbs().maxCoeff());
    for (int i = 0; i < s.dim; ++i) m = std::max(m, s.b[j].third[i].cwiseAbs().maxCoeff());
  }
  return m;
}

double potential_derivative_bound(const CoefficientSample& s) {
  double m = std::max(s.c.grad.cwiseAbs().maxCoeff(), s.c.hess.cwiseAbs().maxCoeff());
  for (int i = 0; i < s.dim; ++i) m = std::max(m, s.c.third[i].cwiseAbs().maxCoeff());
  return m;
}

double diffusion_hessian_form_bound(const CoefficientSample& s) {
  const int n = s.dim;
  std::vector<SmallMatrix> basis;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      SmallMatrix e = SmallMatrix::Zero(n, n);
      if (i == j) {
        e(i, i) = 1.0;
      } else {
        e(i, j) = e(j, i) = 1.0 / std::sqrt(2.0);
      }
      basis.push_back(e);
    }
  const auto m = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd form = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      double acc = 0.0;
      for (int h = 0; h < n; ++h)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            for (int r = 0; r < n; ++r) acc += s.q[h][k].hess(l, r) * basis[a](h, k) * basis[b](l, r);
      form(a, b) = acc;
    }
  const Eigen::MatrixXd sym = 0.5 * (form + form.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double apply_to_jet(const CoefficientSample& s, const ScalarJet& phi) {
  double acc = s.c.value * phi.value;
  for (int i = 0; i < s.dim; ++i) {
    acc += s.b[i].value * phi.grad[i];
    for (int j = 0; j < s.dim; ++j) acc += s.q[i][j].value * phi.hess(i, j);
  }
  return acc;
}

GridFunction apply_operator(const OperatorSpec& op, double t, const GridFunction& u) {
  if (u.dim() != op.dim()) throw std::invalid_argument("mesh and operator dimensions differ");
  const int n = u.dim();
  std::vector<GridFunction> d1, d2;
  for (int i = 0; i < n; ++i) d1.push_back(derivative(u, i == 0 ? MultiIndex{1, 0} : MultiIndex{0, 1}));
  for (const auto& beta : multi_indices(n, 2)) d2.push_back(derivative(u, beta));
  GridFunction out(n, u.radius(), u.step(), d2.front().margin());
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (!out.valid(k)) continue;
    const CoefficientSample s = op.evaluate(t, u.point(k), 0);
    double acc = s.c.value * u[k];
    for (int i = 0; i < n; ++i) acc += s.b[i].value * d1[static_cast<std::size_t>(i)][k];
    if (n == 1) {
      acc += s.q[0][0].value * d2[0][k];
    } else {
      // multi_indices order: (2,0), (1,1), (0,2)
      acc += s.q[0][0].value * d2[0][k] + 2.0 * s.q[0][1].value * d2[1][k] + s.q[1][1].value * d2[2][k];
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace schauder
