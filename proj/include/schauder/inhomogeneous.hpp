#pragma once

#include "schauder/holder_norms.hpp"
#include "schauder/truncated_solver.hpp"

#include <cstddef>
#include <vector>

namespace schauder {

/// Forced problem D_t u = A u + g, u(0) = f, together with the data norms
/// ||f||_{C^{2+theta}} and sup_t ||g(t)||_{C^theta} measured on B(0, r_eval).
struct ForcedProblem {
  DirichletProblem base;  ///< operator, datum, source, mesh, time step, output times
  double theta = 0.5;
  double r_eval = 2.0;
  double norm_f = -1.0;  ///< filled by record_data_norms
  double norm_g = -1.0;
};

/// Samples f and g(t) (at the output times, or every step) on the base mesh and
/// meters their norms. Throws when theta is outside (0, 1).
void record_data_norms(ForcedProblem& p, const NormOptions& opts = {});

/// Direct theta-scheme stepping with the source, converged over the radius ladder.
ExpandingBallResult solve_forced(const ForcedProblem& p, const ExpandingBallOptions& opts = {});

struct VocOptions {
  double nodes_per_unit = 16.0;  ///< minimum quadrature nodes per unit time
  std::size_t budget = 256;      ///< maximum number of homogeneous solves
  Scheme scheme = Scheme::BackwardEuler;
};

class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// u(t) = G(t,0) f + trapezoid sum of G(t, r_j) g(r_j) over r_j in [0, t] on the
/// fixed ball base.radius. Frames at base.output_times (which must be on the
/// time-step grid). Returns the trajectory and the quadrature step used.
struct VocResult {
  Trajectory trajectory;
  double quad_step = 0.0;
  std::size_t solves = 0;
};
VocResult voc_solution(const ForcedProblem& p, const VocOptions& opts = {});

struct SchauderRatio {
  double ratio = 0.0;
  double sup_norm_u = 0.0;  ///< sup over frames of ||u(t)||_{C^{2+theta}}
  double norm_f = 0.0;
  double norm_g = 0.0;
};
/// sup_t ||u(t)||_{C^{2+theta}} / (||f||_{C^{2+theta}} + ||g||_{C^{0,theta}}); 0 for zero data.
SchauderRatio schauder_ratio(const ForcedProblem& p, const Trajectory& traj, const NormOptions& opts = {});

struct ResidualOptions {
  double r_eval = 2.0;
  std::vector<double> excluded_times;  ///< frames at these times are skipped
  double exclusion_tol = 1e-9;
};
/// max |u(t,x) - f(x) - int_0^t (A u + g)(sigma, x) d sigma| over frames and
/// metering nodes; the time integral is the trapezoid rule over the frames.
double integral_identity_residual(const Trajectory& traj, const OperatorSpec& op, const Source& g,
                                  const ResidualOptions& opts = {});

}  // namespace schauder
