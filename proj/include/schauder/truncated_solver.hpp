#pragma once

#include "schauder/grid_function.hpp"
#include "schauder/operator_model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace schauder {

enum class Scheme { BackwardEuler, CrankNicolson };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// Initial datum f(x).
using Datum = std::function<double(const Point&)>;

/// One separable forcing contribution profile(t) * field(x).
struct SourceTerm {
  TimeProfile profile;
  Datum field;
  std::string label;
};
/// g(t, x) = sum of the terms; empty means g == 0.
using Source = std::vector<SourceTerm>;

double evaluate_source(const Source& g, double t, const Point& x);
/// Union of the profile jump times.
std::vector<double> source_jumps(const Source& g);

/// Cauchy-Dirichlet problem on B(0, R) with zero lateral boundary values.
struct DirichletProblem {
  OperatorSpec op;
  double radius = 4.0;
  double h = 1.0 / 32.0;
  double s = 0.0;
  double t_end = 1.0;
  double tau = 1e-2;
  Datum f;
  Source g;
  /// Frames are kept only at these times (nearest step); empty keeps every step.
  std::vector<double> output_times;
  /// Per-point first-order upwinding where the cell-Peclet condition fails.
  bool allow_upwind = true;
};

/// Time-indexed frames on a common mesh.
class Trajectory {
 public:
  std::vector<double> times;
  std::vector<GridFunction> frames;
  nlohmann::json provenance;

  [[nodiscard]] std::size_t size() const { return frames.size(); }
  [[nodiscard]] const GridFunction& initial() const { return frames.front(); }
  [[nodiscard]] const GridFunction& final() const { return frames.back(); }
  /// Frame whose time is closest to t; throws when none lies within tol.
  [[nodiscard]] const GridFunction& at(double t, double tol = 1e-9) const;
  [[nodiscard]] std::size_t index_of(double t, double tol = 1e-9) const;

  /// Directory layout: frame_XXXX.bin (+ .json sidecars) and manifest.json.
  void save(const std::filesystem::path& dir) const;
  static Trajectory load(const std::filesystem::path& dir);
};

/// Raised when the discrete system cannot be solved.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Theta scheme (theta = 1 backward Euler, 1/2 Crank-Nicolson) with the 2nd-order
/// finite-difference A_h and homogeneous Dirichlet rows.
Trajectory solve_dirichlet(const DirichletProblem& p, Scheme scheme = Scheme::BackwardEuler);

struct ExpandingBallOptions {
  std::vector<double> radii{4.0, 8.0, 16.0, 32.0, 64.0};
  double tol = 1e-4;
  Scheme scheme = Scheme::BackwardEuler;
  /// Keep solving past convergence (for studies of the whole ladder).
  bool full_ladder = false;
};

struct ExpandingBallResult {
  Trajectory trajectory;
  std::vector<double> radii;        ///< radii actually solved
  std::vector<double> differences;  ///< sup |u_k - u_{k-1}| on B(0, R0/2) x [s, T]
  std::vector<double> defects;      ///< max(u_{k-1} - u_k, 0) on the common ball (f >= 0 only)
  bool nonnegative_datum = false;
  bool converged = false;
  double achieved_tol = 0.0;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> diffs)
      : std::runtime_error(what), differences(std::move(diffs)) {}
  std::vector<double> differences;
};

/// Solves on each ball of the ladder until two consecutive solutions agree to
/// tol on the metering region. `base.radius` is ignored. Throws
/// ConvergenceError when the ladder is exhausted.
ExpandingBallResult expanding_ball_solve(const DirichletProblem& base, const ExpandingBallOptions& opts = {});

/// max over frames of ||u(t)|| / (e^{c0 (t-s)} ||f||); 0 for the zero trajectory,
/// +inf when f == 0 but u is not.
double verify_sup_bound(const Trajectory& traj, const OperatorSpec& op);

struct SignCheck {
  double excursion = 0.0;  ///< worst positive value of u
  double tolerance = 0.0;  ///< 10 h^2 + 10 tau
  bool pass = true;
};
/// Solves with nonpositive f and g and reports the worst positive excursion.
SignCheck sign_preservation_check(const DirichletProblem& p, Scheme scheme = Scheme::BackwardEuler);

/// Smooth cutoff with 1 on B(x0, 1) and 0 outside B(x0, 2).
double localization_cutoff(const Point& x, const Point& x0);
/// max over frames of || u_f - u_{eta f} - u_{(1-eta) f} ||.
double localization_split_check(const DirichletProblem& p, const Point& x0, Scheme scheme = Scheme::BackwardEuler);

}  // namespace schauder
