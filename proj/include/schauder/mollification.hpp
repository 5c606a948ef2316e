#pragma once

#include "schauder/inhomogeneous.hpp"
#include "schauder/operator_model.hpp"
#include "schauder/time_profile.hpp"
#include "schauder/truncated_solver.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace schauder {

/// Mass of the Gaussian kernel (n/4pi)^{1/2} exp(-n (t - tau)^2 / 4) over tau in [0, T].
double kernel_mass(double n, double t, double horizon);

/// (n/4pi)^{1/2} int_0^T h(tau) exp(-n (t - tau)^2 / 4) dtau. Piecewise-constant
/// profiles use error-function antiderivatives; everything else uses composite
/// 8-point Gauss-Legendre panels of width <= (4/n)^{1/2}/10 split at breakpoints.
double gaussian_mollify(const TimeProfile& h, double n, double t, double horizon);
double gaussian_mollify(const std::function<double(double)>& h, const std::vector<double>& breakpoints, double n,
                        double t, double horizon);

/// The uniform lower bound (nu0 / (2 sqrt(pi))) int_0^{T/2} exp(-s^2/4) ds.
double nu_floor(double nu0, double horizon);

/// Time-mollified copy of an operator with measurable-in-time coefficients.
/// Every coefficient term keeps its spatial field and gets the mollified profile.
class MollifiedOperator {
 public:
  MollifiedOperator(OperatorSpec source, double n);

  [[nodiscard]] const OperatorSpec& source() const { return source_; }
  [[nodiscard]] const OperatorSpec& op() const { return op_; }
  [[nodiscard]] double index() const { return n_; }

  /// Mollified pointwise functions of the source operator.
  [[nodiscard]] double nu_n(double t, const Point& x) const;
  [[nodiscard]] double d_n(double t, const Point& x) const;
  [[nodiscard]] double r_n(double t, const Point& x) const;
  /// Mollified rho (with its floor) and mollified rho^2.
  [[nodiscard]] double rho_n(double t, const Point& x, double rho_floor) const;
  [[nodiscard]] double rho2_n(double t, const Point& x, double rho_floor) const;

 private:
  [[nodiscard]] double mollify_pointwise(const std::function<double(double)>& fn, double t) const;

  OperatorSpec source_;
  OperatorSpec op_;
  double n_;
  std::vector<double> breaks_;
};

/// Mollifies every profile of a separable source.
Source mollify_source(const Source& g, double n, double horizon);

struct CompatConstants {
  double l1 = 1.0;
  double l2 = 1.0;
  double l3 = 1.0;
  double rho_floor = 1e-3;
};

struct PreservationRow {
  double n = 0.0;
  double compat_margin = 0.0;   ///< min of L3 nu_n - (d_n + L1 r_n + L2 K*(rho^2))
  double jensen_margin = 0.0;   ///< min of K*(rho^2) - (K*rho)^2
  double nu_floor_margin = 0.0; ///< min of nu_n - floor
  double worst_t = 0.0;
  Point worst_x;
  bool pass = true;
};

struct PreservationReport {
  std::vector<PreservationRow> rows;
  bool pass = true;
};

/// Re-verifies the compatibility inequality with the unmollified constants and
/// the Jensen direction (K*rho)^2 <= K*(rho^2) at random (t, x) in [0,T] x B(0, box).
PreservationReport hypothesis_preservation_check(const OperatorSpec& source, const CompatConstants& constants,
                                                 const std::vector<double>& n_ladder, double box_radius, int samples,
                                                 std::uint64_t seed = 7);

/// K*(h^2) - (K*h)^2 for a profile h.
double jensen_gap(const TimeProfile& h, double n, double t, double horizon);

struct DiscontinuousRow {
  double n = 0.0;
  double increment_sup = 0.0;   ///< vs the previous ladder member (0 for the first)
  double increment_grad = 0.0;
  double increment_hess = 0.0;
  double residual = 0.0;        ///< integral-identity residual against the source operator
};

struct DiscontinuousResult {
  Trajectory trajectory;  ///< last ladder member
  std::vector<DiscontinuousRow> rows;
  bool converged = false;
};

struct DiscontinuousOptions {
  std::vector<double> n_ladder{4.0, 16.0, 64.0, 256.0};
  double tol = 1e-2;
  double r_eval = 2.0;
  Scheme scheme = Scheme::CrankNicolson;
  /// Radius ladder for each member; `scheme` overrides the ladder's scheme.
  ExpandingBallOptions ball;
};

/// Solves the mollified problems along the ladder (every frame stored), measures
/// Cauchy increments of value, gradient and Hessian on B(0, r_eval), and the
/// integral-identity residual of each member against the unmollified operator
/// with frames at jump times excluded. `converged` is false when the last
/// increment exceeds tol (the rows are still returned for diagnostics).
DiscontinuousResult solve_discontinuous(const DirichletProblem& base, const DiscontinuousOptions& opts);

}  // namespace schauder
