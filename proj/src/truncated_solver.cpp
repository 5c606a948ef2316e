#include "schauder/truncated_solver.hpp"

#include "schauder/cutoff.hpp"
#include "schauder/parallel.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace schauder {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

// Interior unknowns of the staircase ball and cached coefficient fields.
class Discretization {
 public:
  explicit Discretization(const DirichletProblem& p) : p_(p), geom_(p.op.dim(), p.radius, p.h, 0) {
    if (p.op.dim() != geom_.dim()) throw std::invalid_argument("operator dimension mismatch");
    const double lim = p.radius * (1.0 - 1e-9);
    map_.assign(static_cast<std::size_t>(geom_.size()), -1);
    for (Eigen::Index k = 0; k < geom_.size(); ++k)
      if (geom_.point(k).norm() < lim) {
        map_[static_cast<std::size_t>(k)] = static_cast<int>(nodes_.size());
        nodes_.push_back(k);
      }
    if (nodes_.empty()) throw std::invalid_argument("ball contains no interior mesh nodes");
    for (const auto& term : p.op.terms()) {
      std::vector<double> vals(nodes_.size());
      for (std::size_t m = 0; m < nodes_.size(); ++m) vals[m] = term.field.eval(geom_.point(nodes_[m]), 0).value;
      fields_.push_back(std::move(vals));
    }
    for (const auto& term : p.g) {
      std::vector<double> vals(nodes_.size());
      for (std::size_t m = 0; m < nodes_.size(); ++m) vals[m] = term.field(geom_.point(nodes_[m]));
      sources_.push_back(std::move(vals));
    }
    const std::size_t n = nodes_.size();
    q00_.resize(n);
    q01_.resize(n);
    q11_.resize(n);
    b0_.resize(n);
    b1_.resize(n);
    c_.resize(n);
  }

  [[nodiscard]] std::size_t unknowns() const { return nodes_.size(); }
  [[nodiscard]] const GridFunction& geometry() const { return geom_; }
  [[nodiscard]] Eigen::Index node(std::size_t m) const { return nodes_[m]; }

  void load_coefficients(double t) {
    std::fill(q00_.begin(), q00_.end(), 0.0);
    std::fill(q01_.begin(), q01_.end(), 0.0);
    std::fill(q11_.begin(), q11_.end(), 0.0);
    std::fill(b0_.begin(), b0_.end(), 0.0);
    std::fill(b1_.begin(), b1_.end(), 0.0);
    std::fill(c_.begin(), c_.end(), 0.0);
    const auto& terms = p_.op.terms();
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const double w = terms[k].profile(t);
      if (w == 0.0) continue;
      std::vector<double>* dst = nullptr;
      switch (terms[k].slot) {
        case CoefficientSlot::Diffusion:
          dst = terms[k].i != terms[k].j ? &q01_ : (terms[k].i == 0 ? &q00_ : &q11_);
          break;
        case CoefficientSlot::Drift:
          dst = terms[k].i == 0 ? &b0_ : &b1_;
          break;
        case CoefficientSlot::Potential:
          dst = &c_;
          break;
      }
      const auto& f = fields_[k];
      for (std::size_t m = 0; m < f.size(); ++m) (*dst)[m] += w * f[m];
    }
  }

  [[nodiscard]] Eigen::VectorXd source(double t) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nodes_.size()));
    for (std::size_t k = 0; k < p_.g.size(); ++k) {
      const double w = p_.g[k].profile(t);
      if (w == 0.0) continue;
      for (std::size_t m = 0; m < nodes_.size(); ++m) g[static_cast<Eigen::Index>(m)] += w * sources_[k][m];
    }
    return g;
  }

  // Assembles A_h(t) as triplets; counts upwinded points.
  void assemble(double t, std::vector<Eigen::Triplet<double>>& trip, int& upwind_points, bool& mesh_ok) {
    load_coefficients(t);
    trip.clear();
    upwind_points = 0;
    mesh_ok = true;
    const double h = p_.h, h2 = h * h;
    const int dim = geom_.dim();
    for (std::size_t m = 0; m < nodes_.size(); ++m) {
      const Eigen::Index k = nodes_[m];
      const int i = geom_.axis_index(k, 0);
      const int j = dim == 2 ? geom_.axis_index(k, 1) : 0;
      const int row = static_cast<int>(m);
      auto add = [&](int di, int dj, double w) {
        const int col = map_[static_cast<std::size_t>(geom_.index(i + di, j + dj))];
        if (col >= 0 && w != 0.0) trip.emplace_back(row, col, w);
      };
      double diag = c_[m];
      bool upwinded = false;
      for (int axis = 0; axis < dim; ++axis) {
        const double q = axis == 0 ? q00_[m] : q11_[m];
        const double b = axis == 0 ? b0_[m] : b1_[m];
        const int di = axis == 0 ? 1 : 0, dj = axis == 0 ? 0 : 1;
        add(di, dj, q / h2);
        add(-di, -dj, q / h2);
        diag -= 2.0 * q / h2;
        if (std::abs(b) * h <= 2.0 * q) {
          add(di, dj, b / (2.0 * h));
          add(-di, -dj, -b / (2.0 * h));
        } else {
          upwinded = true;
          if (b > 0.0) {
            add(di, dj, b / h);
            diag -= b / h;
          } else {
            add(-di, -dj, -b / h);
            diag += b / h;
          }
        }
      }
      if (dim == 2 && q01_[m] != 0.0) {
        const double w = 2.0 * q01_[m] / (4.0 * h2);
        add(1, 1, w);
        add(-1, -1, w);
        add(1, -1, -w);
        add(-1, 1, -w);
      }
      trip.emplace_back(row, row, diag);
      if (upwinded) {
        ++upwind_points;
        mesh_ok = false;
      }
    }
  }

  [[nodiscard]] bool has_cross_terms() const {
    return std::any_of(p_.op.terms().begin(), p_.op.terms().end(),
                       [](const CoefficientTerm& t) { return t.slot == CoefficientSlot::Diffusion && t.i != t.j; });
  }

 private:
  const DirichletProblem& p_;
  GridFunction geom_;
  std::vector<Eigen::Index> nodes_;
  std::vector<int> map_;
  std::vector<std::vector<double>> fields_;
  std::vector<std::vector<double>> sources_;
  std::vector<double> q00_, q01_, q11_, b0_, b1_, c_;
};

using SparseMatrix = Eigen::SparseMatrix<double>;

// Thomas algorithm on a tridiagonal matrix stored in a sparse matrix (1D unknown ordering).
class TridiagonalSolver {
 public:
  void factor(const SparseMatrix& a) {
    const Eigen::Index n = a.rows();
    lo_.assign(static_cast<std::size_t>(n), 0.0);
    di_.assign(static_cast<std::size_t>(n), 0.0);
    up_.assign(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index col = 0; col < a.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
        const auto r = static_cast<std::size_t>(it.row());
        if (it.row() == col) {
          di_[r] = it.value();
        } else if (it.row() == col + 1) {
          lo_[r] = it.value();
        } else if (it.row() + 1 == col) {
          up_[r] = it.value();
        } else {
          throw SolverError("matrix is not tridiagonal");
        }
      }
    cp_.assign(static_cast<std::size_t>(n), 0.0);
    den_.assign(static_cast<std::size_t>(n), 0.0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
      const double d = di_[i] - (i > 0 ? lo_[i] * cp_[i - 1] : 0.0);
      if (!std::isfinite(d) || std::abs(d) < 1e-300) {
        std::ostringstream os;
        os << "singular tridiagonal system at unknown " << i << " (pivot " << d << ")";
        throw SolverError(os.str());
      }
      den_[i] = d;
      cp_[i] = up_[i] / d;
    }
  }

  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const std::size_t n = den_.size();
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    std::vector<double> dp(n);
    for (std::size_t i = 0; i < n; ++i)
      dp[i] = (rhs[static_cast<Eigen::Index>(i)] - (i > 0 ? lo_[i] * dp[i - 1] : 0.0)) / den_[i];
    for (std::size_t i = n; i-- > 0;)
      x[static_cast<Eigen::Index>(i)] = dp[i] - (i + 1 < n ? cp_[i] * x[static_cast<Eigen::Index>(i + 1)] : 0.0);
    return x;
  }

 private:
  std::vector<double> lo_, di_, up_, cp_, den_;
};

class LinearSolver {
 public:
  explicit LinearSolver(int dim) : dim_(dim) {}

  void factor(const SparseMatrix& a) {
    if (dim_ == 1) {
      tri_.factor(a);
      return;
    }
    lu_.analyzePattern(a);
    lu_.factorize(a);
    if (lu_.info() != Eigen::Success) throw SolverError("sparse LU factorization failed: " + lu_.lastErrorMessage());
  }

  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) {
    if (dim_ == 1) return tri_.solve(rhs);
    Eigen::VectorXd x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success) throw SolverError("sparse LU solve failed");
    return x;
  }

 private:
  int dim_;
  TridiagonalSolver tri_;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

std::size_t step_count(const DirichletProblem& p) {
  if (!(p.tau > 0.0)) throw std::invalid_argument("time step must be positive");
  const double span = p.t_end - p.s;
  if (!(span >= 0.0)) throw std::invalid_argument("time interval is reversed");
  const double steps = std::round(span / p.tau);
  if (std::abs(steps * p.tau - span) > 1e-9 * std::max(1.0, span))
    throw std::invalid_argument("(T - s) / tau must be an integer");
  return static_cast<std::size_t>(steps);
}

}  // namespace

std::string to_string(Scheme s) { return s == Scheme::BackwardEuler ? "backward_euler" : "crank_nicolson"; }

Scheme scheme_from_string(const std::string& s) {
  if (s == "backward_euler" || s == "be") return Scheme::BackwardEuler;
  if (s == "crank_nicolson" || s == "cn") return Scheme::CrankNicolson;
  throw std::invalid_argument("unknown scheme: " + s);
}

double evaluate_source(const Source& g, double t, const Point& x) {
  double acc = 0.0;
  for (const auto& term : g) acc += term.profile(t) * term.field(x);
  return acc;
}

std::vector<double> source_jumps(const Source& g) {
  std::set<double> all;
  for (const auto& term : g)
    for (const double j : term.profile.jumps()) all.insert(j);
  return {all.begin(), all.end()};
}

// ---------------------------------------------------------------------------
// Trajectory

std::size_t Trajectory::index_of(double t, double tol) const {
  if (times.empty()) throw std::out_of_range("empty trajectory");
  std::size_t best = 0;
  for (std::size_t k = 1; k < times.size(); ++k)
    if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
  if (std::abs(times[best] - t) > tol) throw std::out_of_range("no frame at requested time");
  return best;
}

const GridFunction& Trajectory::at(double t, double tol) const { return frames[index_of(t, tol)]; }

void Trajectory::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["times"] = times;
  manifest["provenance"] = provenance;
  manifest["frames"] = nlohmann::json::array();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    std::ostringstream name;
    name << "frame_" << std::setw(4) << std::setfill('0') << k << ".bin";
    frames[k].write_binary(dir / name.str());
    manifest["frames"].push_back(name.str());
  }
  const auto tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    out << manifest.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, dir / "manifest.json");
}

Trajectory Trajectory::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("trajectory manifest missing in " + dir.string());
  const auto manifest = nlohmann::json::parse(in);
  Trajectory traj;
  traj.times = manifest.at("times").get<std::vector<double>>();
  traj.provenance = manifest.value("provenance", nlohmann::json::object());
  for (const auto& name : manifest.at("frames")) traj.frames.push_back(GridFunction::read_binary(dir / name.get<std::string>()));
  if (traj.frames.size() != traj.times.size()) throw std::runtime_error("trajectory manifest is inconsistent");
  return traj;
}

// ---------------------------------------------------------------------------
// Solver

Trajectory solve_dirichlet(const DirichletProblem& p, Scheme scheme) {
  if (!p.f) throw std::invalid_argument("initial datum missing");
  const std::size_t steps = step_count(p);
  Discretization disc(p);
  const auto n = static_cast<Eigen::Index>(disc.unknowns());
  const double theta = scheme == Scheme::BackwardEuler ? 1.0 : 0.5;

  // Steps at which frames are kept.
  std::vector<char> keep(steps + 1, p.output_times.empty() ? 1 : 0);
  keep[0] = 1;
  for (const double t : p.output_times) {
    const double k = std::round((t - p.s) / p.tau);
    if (k < 0.0 || k > static_cast<double>(steps)) throw std::invalid_argument("output time outside [s, T]");
    keep[static_cast<std::size_t>(k)] = 1;
  }

  Trajectory traj;
  GridFunction frame0 = GridFunction::sample(p.op.dim(), p.radius, p.h, p.f);
  Eigen::VectorXd u(n);
  for (Eigen::Index m = 0; m < n; ++m) u[m] = frame0[disc.node(static_cast<std::size_t>(m))];
  traj.times.push_back(p.s);
  traj.frames.push_back(frame0);

  auto to_frame = [&](const Eigen::VectorXd& v) {
    GridFunction g(p.op.dim(), p.radius, p.h, 0);
    for (Eigen::Index m = 0; m < n; ++m) g[disc.node(static_cast<std::size_t>(m))] = v[m];
    return g;
  };

  const bool frozen = p.op.time_independent();
  std::vector<Eigen::Triplet<double>> trip;
  SparseMatrix a_now(n, n), a_next(n, n);
  SparseMatrix eye(n, n);
  eye.setIdentity();
  int upwind = 0, max_upwind = 0;
  bool mesh_ok = true, all_ok = true;

  auto build = [&](double t, SparseMatrix& a) {
    disc.assemble(t, trip, upwind, mesh_ok);
    if (!mesh_ok && !p.allow_upwind)
      throw std::invalid_argument("mesh condition violated without upwinding (reduce h)");
    max_upwind = std::max(max_upwind, upwind);
    all_ok = all_ok && mesh_ok;
    a.setFromTriplets(trip.begin(), trip.end());
  };

  LinearSolver solver(p.op.dim());
  bool factored = false;
  build(p.s, a_now);
  Eigen::VectorXd g_now = p.g.empty() ? Eigen::VectorXd::Zero(n) : disc.source(p.s);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t1 = p.s + static_cast<double>(k + 1) * p.tau;
    if (!frozen || !factored) {
      if (frozen) {
        a_next = a_now;
      } else {
        build(t1, a_next);
      }
      solver.factor(eye - p.tau * theta * a_next);
      factored = true;
    }
    const Eigen::VectorXd g_next = p.g.empty() ? Eigen::VectorXd::Zero(n) : disc.source(t1);
    Eigen::VectorXd rhs = u;
    if (theta < 1.0) rhs += p.tau * (1.0 - theta) * (a_now * u);
    if (!p.g.empty()) rhs += p.tau * (theta * g_next + (1.0 - theta) * g_now);
    u = solver.solve(rhs);
    if (!u.allFinite()) throw SolverError("non-finite solution values at t = " + std::to_string(t1));
    if (!frozen) std::swap(a_now, a_next);
    g_now = g_next;
    if (keep[k + 1]) {
      traj.times.push_back(t1);
      traj.frames.push_back(to_frame(u));
    }
  }

  const std::string op_key = p.op.source.is_null() ? p.op.name : p.op.source.dump();
  traj.provenance = {{"operator", p.op.name},
                     {"operator_hash", hex64(fnv1a(op_key))},
                     {"scheme", to_string(scheme)},
                     {"R", p.radius},
                     {"h", p.h},
                     {"tau", p.tau},
                     {"s", p.s},
                     {"T", p.t_end},
                     {"upwind_points", max_upwind},
                     {"central_everywhere", all_ok},
                     {"cross_terms", disc.has_cross_terms()},
                     {"monotone_stencil", !disc.has_cross_terms()}};
  return traj;
}

ExpandingBallResult expanding_ball_solve(const DirichletProblem& base, const ExpandingBallOptions& opts) {
  if (opts.radii.empty()) throw std::invalid_argument("radius ladder is empty");
  for (std::size_t k = 1; k < opts.radii.size(); ++k)
    if (!(opts.radii[k] > opts.radii[k - 1])) throw std::invalid_argument("radius ladder must be strictly increasing");
  const double r0 = opts.radii.front();
  const double r_meter = r0 / 2.0;

  ExpandingBallResult res;
  std::vector<Trajectory> sols;

  auto solve_at = [&](double radius) {
    DirichletProblem p = base;
    p.radius = radius;
    return solve_dirichlet(p, opts.scheme);
  };

  auto compare = [&](const Trajectory& prev, const Trajectory& next, double& diff, double& defect) {
    diff = 0.0;
    defect = 0.0;
    if (prev.size() != next.size()) throw std::logic_error("ladder members stored different frames");
    for (std::size_t m = 0; m < prev.size(); ++m) {
      const GridFunction& a = prev.frames[m];
      const GridFunction b = next.frames[m].restrict_to(a.radius());
      for (Eigen::Index k = 0; k < a.size(); ++k) {
        const double rho = a.point(k).norm();
        if (rho > a.radius()) continue;
        if (rho <= r_meter * (1.0 + 1e-12)) diff = std::max(diff, std::abs(b[k] - a[k]));
        defect = std::max(defect, a[k] - b[k]);
      }
    }
  };

  if (opts.full_ladder) {
    sols.resize(opts.radii.size());
    parallel_tasks(opts.radii.size(), [&](std::size_t k) { sols[k] = solve_at(opts.radii[k]); });
  }

  for (std::size_t k = 0; k < opts.radii.size(); ++k) {
    if (!opts.full_ladder) sols.push_back(solve_at(opts.radii[k]));
    res.radii.push_back(opts.radii[k]);
    if (k == 0) {
      res.nonnegative_datum = sols[0].frames.front().values().minCoeff() >= 0.0;
      continue;
    }
    double diff = 0.0, defect = 0.0;
    compare(sols[k - 1], sols[k], diff, defect);
    res.differences.push_back(diff);
    if (res.nonnegative_datum) res.defects.push_back(std::max(defect, 0.0));
    if (!res.converged && diff <= opts.tol) {
      res.converged = true;
      res.achieved_tol = diff;
      if (!opts.full_ladder) break;
    }
    if (!opts.full_ladder && k >= 2) sols[k - 2] = Trajectory{};
  }
  if (!res.converged) {
    std::ostringstream os;
    os << "expanding-ball ladder did not converge to tol " << opts.tol << "; differences:";
    for (const double d : res.differences) os << ' ' << d;
    throw ConvergenceError(os.str(), res.differences);
  }
  if (opts.full_ladder) {
    // The converged member is the first whose difference met the tolerance.
    std::size_t k = 0;
    while (res.differences[k] > opts.tol) ++k;
    res.trajectory = std::move(sols[k + 1]);
  } else {
    res.trajectory = std::move(sols.back());
  }
  res.trajectory.provenance["achieved_tol"] = res.achieved_tol;
  res.trajectory.provenance["radius_ladder"] = res.radii;
  return res;
}

double verify_sup_bound(const Trajectory& traj, const OperatorSpec& op) {
  const double s = traj.times.front();
  const double f_norm = traj.initial().values().cwiseAbs().maxCoeff();
  double worst = 0.0;
  bool nonzero = false;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double u = traj.frames[k].values().cwiseAbs().maxCoeff();
    if (u > 0.0) nonzero = true;
    if (f_norm > 0.0) worst = std::max(worst, u / (std::exp(op.c0 * (traj.times[k] - s)) * f_norm));
  }
  if (f_norm == 0.0) return nonzero ? std::numeric_limits<double>::infinity() : 0.0;
  return worst;
}

SignCheck sign_preservation_check(const DirichletProblem& p, Scheme scheme) {
  const Trajectory traj = solve_dirichlet(p, scheme);
  SignCheck out;
  out.tolerance = 10.0 * p.h * p.h + 10.0 * p.tau;
  for (const auto& fr : traj.frames) out.excursion = std::max(out.excursion, fr.values().maxCoeff());
  out.pass = out.excursion <= out.tolerance;
  return out;
}

double localization_cutoff(const Point& x, const Point& x0) { return cutoff_profile((x - x0).norm() / 2.0)[0]; }

double localization_split_check(const DirichletProblem& p, const Point& x0, Scheme scheme) {
  DirichletProblem near = p, far = p;
  const Datum f = p.f;
  near.f = [f, x0](const Point& x) { return localization_cutoff(x, x0) * f(x); };
  far.f = [f, x0](const Point& x) { return (1.0 - localization_cutoff(x, x0)) * f(x); };
  // The forcing enters exactly once.
  near.g.clear();
  Trajectory full, a, b;
  std::vector<std::function<void()>> jobs{[&] { full = solve_dirichlet(p, scheme); },
                                          [&] { a = solve_dirichlet(near, scheme); },
                                          [&] { b = solve_dirichlet(far, scheme); }};
  parallel_tasks(jobs.size(), [&](std::size_t k) { jobs[k](); });
  double worst = 0.0;
  for (std::size_t m = 0; m < full.size(); ++m) {
    const Eigen::VectorXd r = full.frames[m].values() - a.frames[m].values() - b.frames[m].values();
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace schauder
