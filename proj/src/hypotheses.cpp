#include "schauder/hypotheses.hpp"

#include "schauder/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace schauder {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "pass") return Verdict::Pass;
  if (s == "fail") return Verdict::Fail;
  if (s == "indeterminate") return Verdict::Indeterminate;
  throw std::invalid_argument("unknown verdict '" + s + "'");
}

bool HypothesisReport::all_pass() const {
  return std::all_of(conditions.begin(), conditions.end(),
                     [](const ConditionRecord& c) { return c.verdict == Verdict::Pass; });
}

const ConditionRecord* HypothesisReport::try_find(const std::string& id) const {
  for (const auto& c : conditions)
    if (c.id == id) return &c;
  return nullptr;
}

const ConditionRecord& HypothesisReport::find(const std::string& id) const {
  if (const auto* c = try_find(id)) return *c;
  throw std::out_of_range("no condition '" + id + "' in report");
}

nlohmann::json HypothesisReport::to_json() const {
  nlohmann::json out;
  out["sampling"] = sampling;
  out["conditions"] = nlohmann::json::array();
  for (const auto& c : conditions) {
    nlohmann::json j;
    j["id"] = c.id;
    j["verdict"] = to_string(c.verdict);
    j["constants"] = c.constants;
    j["witness"] = {{"t", c.witness.t}, {"x", c.witness.x}, {"xi", c.witness.xi}};
    j["margin"] = c.margin;
    j["note"] = c.note;
    out["conditions"].push_back(std::move(j));
  }
  return out;
}

HypothesisReport HypothesisReport::from_json(const nlohmann::json& j) {
  HypothesisReport r;
  r.sampling = j.value("sampling", nlohmann::json::object());
  for (const auto& c : j.at("conditions")) {
    ConditionRecord rec;
    rec.id = c.at("id").get<std::string>();
    rec.verdict = verdict_from_string(c.at("verdict").get<std::string>());
    rec.constants = c.value("constants", std::map<std::string, double>{});
    const auto& w = c.at("witness");
    rec.witness.t = w.value("t", 0.0);
    rec.witness.x = w.value("x", std::vector<double>{});
    rec.witness.xi = w.value("xi", std::vector<double>{});
    rec.margin = c.value("margin", 0.0);
    rec.note = c.value("note", std::string{});
    r.conditions.push_back(std::move(rec));
  }
  return r;
}

namespace {

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (const char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

}  // namespace

void HypothesisReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.precision(17);
  os << "condition,verdict,margin,witness_t,witness_x,witness_xi,constants,note\n";
  for (const auto& c : conditions) {
    std::string consts;
    for (const auto& [k, v] : c.constants) {
      std::ostringstream kv;
      kv.precision(17);
      kv << k << "=" << v;
      consts += (consts.empty() ? "" : ";") + kv.str();
    }
    os << c.id << ',' << to_string(c.verdict) << ',' << c.margin << ',' << c.witness.t << ','
       << join(c.witness.x) << ',' << join(c.witness.xi) << ',' << quoted(consts) << ',' << quoted(c.note) << '\n';
  }
}

namespace {

struct SamplePoint {
  double t = 0.0;
  Point x;
  bool inner = false;
};

struct PointData {
  double nu = 0.0;
  Point xi;        // eigenvector of the smallest eigenvalue of Q
  double asym = 0.0;
  double g1 = 0.0, g2 = 0.0, g3 = 0.0;
  double c = 0.0;
  double k1 = 0.0, k2 = 0.0, k2form = 0.0, k3 = 0.0;
  double d = 0.0;
  Point d_dir;
  double r = 0.0;
  double rho = 0.0;
  double lyap = 0.0;
  double phi = 0.0;
};

std::vector<double> axis(double radius, int count) {
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) v[static_cast<std::size_t>(k)] = -radius + 2.0 * radius * k / (count - 1);
  return v;
}

std::vector<SamplePoint> build_samples(int dim, double horizon, const HypothesisOptions& o) {
  std::vector<double> times;
  for (int k = 0; k < o.time_samples; ++k)
    times.push_back(o.time_samples == 1 ? 0.0 : horizon * k / (o.time_samples - 1));
  std::vector<SamplePoint> pts;
  const auto add_box = [&](double radius, bool inner) {
    const auto ax = axis(radius, o.space_samples);
    for (const double t : times) {
      if (dim == 1) {
        for (const double a : ax) {
          Point x(1);
          x << a;
          pts.push_back({t, x, inner});
        }
      } else {
        for (const double a : ax)
          for (const double b : ax) {
            Point x(2);
            x << a, b;
            if (x.norm() > radius * (1.0 + 1e-12)) continue;
            pts.push_back({t, x, inner});
          }
      }
    }
  };
  add_box(o.box_radius, true);
  add_box(2.0 * o.box_radius, false);
  if (o.previous) {
    for (const auto& c : o.previous->conditions) {
      if (c.verdict != Verdict::Fail || static_cast<int>(c.witness.x.size()) != dim) continue;
      Point x(dim);
      for (int i = 0; i < dim; ++i) x[i] = c.witness.x[static_cast<std::size_t>(i)];
      if (x.norm() > 2.0 * o.box_radius * (1.0 + 1e-12)) continue;
      pts.push_back({std::clamp(c.witness.t, 0.0, horizon), x, false});
    }
  }
  return pts;
}

PointData evaluate_point(const OperatorSpec& op, const SamplePoint& sp, double rho_floor, double fd_scale) {
  const int n = op.dim();
  const CoefficientSample s = op.evaluate(sp.t, sp.x, 3, fd_scale);
  PointData d;
  const SmallMatrix q = s.diffusion();
  double asym = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) asym = std::max(asym, std::abs(s.q[i][j].value - s.q[j][i].value));
  d.asym = asym / std::max(q.norm(), std::numeric_limits<double>::min());

  Eigen::SelfAdjointEigenSolver<SmallMatrix> eq(q);
  d.nu = eq.eigenvalues()[0];
  d.xi = eq.eigenvectors().col(0);
  const double w = 1.0 + sp.x.squaredNorm();
  d.g1 = (q * sp.x).norm() / (w * d.nu);
  d.g2 = q.trace() / (w * d.nu);
  d.g3 = s.drift().dot(sp.x) / (w * d.nu);
  d.c = s.c.value;

  double m1 = 0.0, m2 = 0.0, m3 = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const ScalarJet& jet = s.q[i][j];
      for (int a = 0; a < n; ++a) {
        m1 = std::max(m1, std::abs(jet.grad[a]));
        for (int b = 0; b < n; ++b) {
          m2 = std::max(m2, std::abs(jet.hess(a, b)));
          for (int c = 0; c < n; ++c) m3 = std::max(m3, std::abs(jet.d3(a, b, c)));
        }
      }
    }
  d.k1 = m1 / d.nu;
  d.k2 = m2 / d.nu;
  d.k3 = m3 / d.nu;
  d.k2form = diffusion_hessian_form_bound(s) / d.nu;

  const SmallMatrix db = s.drift_jacobian();
  Eigen::SelfAdjointEigenSolver<SmallMatrix> ed(0.5 * (db + db.transpose()));
  d.d = ed.eigenvalues()[n - 1];
  d.d_dir = ed.eigenvectors().col(n - 1);
  d.r = drift_derivative_bound(s);
  d.rho = std::max(potential_derivative_bound(s), rho_floor);

  if (op.lyapunov) {
    const ScalarJet phi = op.lyapunov->phi(sp.x, 2);
    d.phi = phi.value;
    d.lyap = apply_to_jet(s, phi) - op.lyapunov->lambda * phi.value;
  }
  return d;
}

Witness make_witness(const SamplePoint& sp, const Point* xi = nullptr) {
  Witness w;
  w.t = sp.t;
  w.x.assign(sp.x.data(), sp.x.data() + sp.x.size());
  if (xi) w.xi.assign(xi->data(), xi->data() + xi->size());
  return w;
}

struct Fitter {
  const std::vector<SamplePoint>& pts;
  const std::vector<PointData>& data;
  const HypothesisOptions& o;

  double inflate(double m, double floor = 1e-9) const { return std::max(m > 0.0 ? o.inflation * m : 0.0, floor); }

  // Ratio-boundedness test: fit on the inner box, confirm on the doubled box.
  template <class F>
  ConditionRecord bounded(const std::string& id, const std::string& name, F ratio, double floor = 1e-9,
                          bool with_xi = false) const {
    double m_inner = -std::numeric_limits<double>::infinity();
    double m_outer = m_inner;
    std::size_t arg_outer = 0, arg_inner = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double v = ratio(data[k]);
      if (pts[k].inner && v > m_inner) m_inner = v, arg_inner = k;
      if (v > m_outer) m_outer = v, arg_outer = k;
    }
    ConditionRecord rec;
    rec.id = id;
    const double allowed = m_inner + o.growth_tolerance * std::max(std::abs(m_inner), floor);
    rec.constants[name] = inflate(m_inner);
    rec.constants[name + "_ratio_R"] = m_inner;
    rec.constants[name + "_ratio_2R"] = m_outer;
    rec.margin = allowed - m_outer;
    const std::size_t w = rec.margin >= 0.0 ? arg_inner : arg_outer;
    rec.witness = make_witness(pts[w], with_xi ? &data[w].xi : nullptr);
    if (rec.margin >= 0.0 && std::isfinite(m_outer)) {
      rec.verdict = Verdict::Pass;
    } else {
      rec.verdict = Verdict::Fail;
      rec.note = name + " ratio grows from " + std::to_string(m_inner) + " to " + std::to_string(m_outer) +
                 " on box doubling";
    }
    return rec;
  }
};

std::vector<ConditionRecord> run_checks(const OperatorSpec& op, const std::vector<SamplePoint>& pts,
                                        const HypothesisOptions& o, double fd_scale) {
  std::vector<PointData> data(pts.size());
  parallel_for(pts.size(), [&](std::size_t lo, std::size_t hi, int) {
    for (std::size_t k = lo; k < hi; ++k) data[k] = evaluate_point(op, pts[k], o.rho_floor, fd_scale);
  });
  const Fitter fit{pts, data, o};
  std::vector<ConditionRecord> out;

  {
    ConditionRecord rec;
    rec.id = "symmetry";
    std::size_t arg = 0;
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (data[k].asym > data[arg].asym) arg = k;
    rec.constants["max_relative_asymmetry"] = data[arg].asym;
    rec.margin = 1e-12 - data[arg].asym;
    rec.verdict = rec.margin >= 0.0 ? Verdict::Pass : Verdict::Fail;
    rec.witness = make_witness(pts[arg]);
    out.push_back(std::move(rec));
  }
  {
    ConditionRecord rec;
    rec.id = "ellipticity";
    std::size_t arg = 0, arg_inner = 0;
    double min_inner = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (data[k].nu < data[arg].nu) arg = k;
      if (pts[k].inner && data[k].nu < min_inner) min_inner = data[k].nu, arg_inner = k;
    }
    const double nu_min = data[arg].nu;
    rec.constants["nu_min"] = nu_min;
    rec.constants["nu0"] = op.nu0;
    if (op.nu0 > 0.0) {
      rec.margin = nu_min - op.nu0 * (1.0 - 1e-12);
    } else {
      // No declared floor: the infimum must stay positive and stable as the box grows.
      rec.margin = std::min(nu_min, nu_min - (1.0 - o.growth_tolerance) * min_inner);
      rec.note = "no declared floor; fitted from samples";
    }
    rec.verdict = rec.margin >= 0.0 ? Verdict::Pass : Verdict::Fail;
    rec.witness = make_witness(pts[rec.verdict == Verdict::Pass ? arg_inner : arg], &data[arg].xi);
    out.push_back(std::move(rec));
  }
  out.push_back(fit.bounded("growth_diffusion", "C1", [](const PointData& d) { return d.g1; }));
  out.push_back(fit.bounded("growth_trace", "C2", [](const PointData& d) { return d.g2; }));
  out.push_back(fit.bounded("growth_drift", "C3", [](const PointData& d) { return d.g3; }));
  {
    ConditionRecord rec;
    rec.id = "potential_bound";
    std::size_t arg = 0;
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (data[k].c > data[arg].c) arg = k;
    rec.constants["c_max"] = data[arg].c;
    rec.constants["c0"] = op.c0;
    rec.margin = op.c0 + 1e-12 * std::max(1.0, std::abs(op.c0)) - data[arg].c;
    rec.verdict = rec.margin >= 0.0 ? Verdict::Pass : Verdict::Fail;
    rec.witness = make_witness(pts[arg]);
    out.push_back(std::move(rec));
  }
  out.push_back(fit.bounded("diffusion_derivative_1", "K1", [](const PointData& d) { return d.k1; }));
  out.push_back(fit.bounded("diffusion_derivative_2", "K2", [](const PointData& d) { return d.k2; }));
  out.push_back(fit.bounded("diffusion_hessian_form", "K2_form", [](const PointData& d) { return d.k2form; }));
  out.push_back(fit.bounded("diffusion_derivative_3", "K3", [](const PointData& d) { return d.k3; }));

  {
    // Feasibility search over dyadic L1, L2; L3 minimized, ties keep the larger L's.
    double best_m = std::numeric_limits<double>::infinity();
    double best_l1 = 1.0, best_l2 = 1.0;
    for (int a = 0; a <= 12; ++a)
      for (int b = 0; b <= 12; ++b) {
        const double l1 = std::ldexp(1.0, -a), l2 = std::ldexp(1.0, -b);
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < pts.size(); ++k)
          if (pts[k].inner)
            m = std::max(m, (data[k].d + l1 * data[k].r + l2 * data[k].rho * data[k].rho) / data[k].nu);
        if (!std::isfinite(best_m) || m < best_m - 1e-12 * std::max(1.0, std::abs(best_m)))
          best_m = m, best_l1 = l1, best_l2 = l2;
      }
    ConditionRecord rec = fit.bounded(
        "compatibility", "L3",
        [&](const PointData& d) { return (d.d + best_l1 * d.r + best_l2 * d.rho * d.rho) / d.nu; });
    rec.constants["L1"] = best_l1;
    rec.constants["L2"] = best_l2;
    double dmax = -std::numeric_limits<double>::infinity(), rmax = 0.0, rhomax = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (pts[k].inner) dmax = std::max(dmax, data[k].d), rmax = std::max(rmax, data[k].r),
                        rhomax = std::max(rhomax, data[k].rho);
    rec.constants["d_max"] = dmax;
    rec.constants["r_max"] = rmax;
    rec.constants["rho_max"] = rhomax;
    rec.constants["rho0"] = o.rho_floor;
    out.push_back(std::move(rec));
  }

  if (op.lyapunov) {
    ConditionRecord rec = fit.bounded("lyapunov", "lyapunov_sup", [](const PointData& d) { return d.lyap; }, 1.0);
    rec.constants["lambda"] = op.lyapunov->lambda;
    rec.constants["lyapunov_sup"] = rec.constants["lyapunov_sup_ratio_2R"];
    // phi must grow: its smallest value far out exceeds its largest value near the origin.
    double phi_near = -std::numeric_limits<double>::infinity(), phi_far = std::numeric_limits<double>::infinity();
    std::size_t arg_far = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double rad = pts[k].x.norm();
      if (rad <= 0.25 * o.box_radius) phi_near = std::max(phi_near, data[k].phi);
      if (rad >= 1.5 * o.box_radius && data[k].phi < phi_far) phi_far = data[k].phi, arg_far = k;
    }
    if (std::isfinite(phi_near) && std::isfinite(phi_far) && !(phi_far > phi_near) && rec.verdict == Verdict::Pass) {
      rec.verdict = Verdict::Fail;
      rec.margin = phi_far - phi_near;
      rec.witness = make_witness(pts[arg_far]);
      rec.note = "phi does not grow at infinity";
    }
    out.push_back(std::move(rec));
  } else {
    ConditionRecord rec;
    rec.id = "lyapunov";
    rec.verdict = Verdict::Indeterminate;
    rec.note = "no Lyapunov pair declared";
    out.push_back(std::move(rec));
  }

  if (op.poly) {
    const PolyExponents& e = *op.poly;
    Point far = Point::Zero(op.dim());
    far[0] = 2.0 * o.box_radius;
    const SamplePoint far_pt{0.0, far, false};
    {
      ConditionRecord rec;
      rec.id = "exponent_order";
      rec.constants["p"] = e.p;
      rec.constants["q"] = e.q;
      rec.margin = e.q - e.p;
      rec.verdict = e.p <= e.q ? Verdict::Pass : Verdict::Fail;
      rec.witness = make_witness(far_pt);
      if (rec.verdict == Verdict::Fail) rec.note = "p > q: diffusion outgrows the drift";
      out.push_back(std::move(rec));
    }
    {
      // Degrees in (1+|x|^2) of the tight d, r, rho^2 against nu ~ (1+|x|^2)^p:
      // d ~ b0 (1+|x|^2)^q < 0, r ~ (1+|x|^2)^{q-1/2}, rho^2 ~ (1+|x|^2)^{2r-1}.
      double positive = -std::numeric_limits<double>::infinity();
      if (e.q > 0) positive = std::max(positive, e.q - 0.5);
      if (e.r > 0) positive = std::max(positive, 2.0 * e.r - 1.0);
      const double dominant = std::max(e.p, e.q);
      ConditionRecord rec;
      rec.id = "degree_comparison";
      rec.constants["positive_degree"] = std::isfinite(positive) ? positive : 0.0;
      rec.constants["dominant_degree"] = dominant;
      rec.margin = std::isfinite(positive) ? dominant - positive : dominant + 1.0;
      rec.verdict = rec.margin >= 0.0 ? Verdict::Pass : Verdict::Fail;
      rec.witness = make_witness(far_pt);
      out.push_back(std::move(rec));
    }
    {
      const Kappa3Fit k_r = fit_kappa3(e, o.box_radius);
      const Kappa3Fit k_2r = fit_kappa3(e, 2.0 * o.box_radius);
      ConditionRecord rec;
      rec.id = "lyapunov_kappa3";
      rec.constants["kappa3_sup_R"] = k_r.sup;
      rec.constants["kappa3_sup_2R"] = k_2r.sup;
      rec.constants["kappa3"] = e.kappa3;
      rec.margin = k_r.sup + o.growth_tolerance * std::max(std::abs(k_r.sup), 1.0) - k_2r.sup;
      rec.verdict = rec.margin >= 0.0 ? Verdict::Pass : Verdict::Fail;
      Point x = Point::Zero(op.dim());
      x[0] = rec.verdict == Verdict::Pass ? k_r.argmax : k_2r.argmax;
      rec.witness = make_witness({0.0, x, false});
      if (rec.verdict == Verdict::Fail) rec.note = "kappa3 expression unbounded in |x|";
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace

HypothesisReport check_hypotheses(const OperatorSpec& op, const HypothesisOptions& opts) {
  if (opts.space_samples < 8) throw std::invalid_argument("at least 8 samples per axis are required");
  if (opts.time_samples < 1) throw std::invalid_argument("at least one time sample is required");
  if (!(opts.box_radius > 0.0)) throw std::invalid_argument("box radius must be positive");
  if (!(opts.rho_floor > 0.0)) throw std::invalid_argument("rho floor must be positive");

  const auto pts = build_samples(op.dim(), op.horizon(), opts);
  HypothesisReport report;
  report.conditions = run_checks(op, pts, opts, 1.0);
  const bool fd = !op.analytic();
  if (fd) {
    // Finite-difference noise: a verdict that flips when the step doubles is not trusted.
    const auto coarse = run_checks(op, pts, opts, 2.0);
    for (std::size_t k = 0; k < report.conditions.size(); ++k)
      if (coarse[k].verdict != report.conditions[k].verdict) {
        report.conditions[k].verdict = Verdict::Indeterminate;
        report.conditions[k].note = "verdict changes between finite-difference steps h and 2h";
      }
  }
  if (opts.previous) {
    for (auto& c : report.conditions) {
      const ConditionRecord* old = opts.previous->try_find(c.id);
      if (old && old->verdict == Verdict::Fail && c.verdict != Verdict::Fail) {
        c.verdict = Verdict::Fail;
        c.witness = old->witness;
        c.margin = old->margin;
        c.note = "retained witness: " + old->note;
      }
    }
  }

  std::size_t inner = 0;
  for (const auto& p : pts) inner += p.inner ? 1 : 0;
  report.sampling = {{"box_radius", opts.box_radius},
                     {"outer_radius", 2.0 * opts.box_radius},
                     {"space_samples", opts.space_samples},
                     {"time_samples", opts.time_samples},
                     {"points_inner", inner},
                     {"points_total", pts.size()},
                     {"rho_floor", opts.rho_floor},
                     {"inflation", opts.inflation},
                     {"finite_difference_fallback", fd},
                     {"operator", op.name}};
  return report;
}

}  // namespace schauder
