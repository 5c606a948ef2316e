#pragma once

#include "schauder/holder_norms.hpp"
#include "schauder/truncated_solver.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace schauder {

/// Measured norms ||G(t,s) f||_{C^beta} along a time ladder and their power-law fit.
struct SmoothingFit {
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<double> elapsed;  ///< t_i - s
  std::vector<double> norms;    ///< full C^beta norm
  std::vector<double> top;      ///< top-order term alone (sup of the beta-th derivatives, or the seminorm)
  double norm_f = 0.0;          ///< ||f||_{C^alpha} on the metering ball
  double exponent = 0.0;        ///< e in norm ~ C (t - s)^{-e}
  double constant = 0.0;        ///< C
  double residual = 0.0;        ///< RMS of the log-log residuals
  double top_exponent = 0.0;
  double top_constant = 0.0;
  double predicted = 0.0;       ///< (beta - alpha) / 2
  double resolution_gap = 0.0;  ///< worst relative change of the norm on the 2h mesh
};

struct SmoothingOptions {
  double alpha = 0.0;
  double beta = 1.0;
  /// t_i - s; empty means T 2^{-i}, i = 1..8.
  std::vector<double> ladder;
  double r_eval = 2.0;
  double h = 1.0 / 256.0;
  double tau = 1e-3;
  ExpandingBallOptions ball;
  NormOptions norms;
  /// Relative disagreement with the 2h mesh above which the ladder is under-resolved.
  double resolution_tol = 0.1;
  bool resolution_check = true;
};

class UnderResolvedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares line through (log x_i, log y_i); returns {slope, intercept, rms residual}.
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};
LogLogFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

/// Default geometric ladder T 2^{-i}, i = 1..8.
std::vector<double> default_ladder(double horizon);

/// One expanding-ball solve from s, then ||u(s + t_i)||_{C^beta} on B(0, r_eval)
/// for every ladder point and the fit log norm = log C - e log(t - s).
/// Throws std::invalid_argument for fewer than 5 points, a span under 1.5
/// decades or t_i - s < 20 tau, and UnderResolvedError when a norm moves by
/// more than resolution_tol on the coarsened mesh.
SmoothingFit measure_smoothing(const OperatorSpec& op, const Datum& f, double s, const SmoothingOptions& opts);

/// eta(x) = psi(|x| / n) on the mesh of `like`.
GridFunction cutoff_eta(double n, const GridFunction& like);
/// eta and its spatial derivatives to order 3.
ScalarJet cutoff_eta_jet(double n, const Point& x, int order = 3);

struct BernsteinFrame {
  double t = 0.0;
  double sup_v = 0.0;
  double bound = 0.0;  ///< e^{c1 (t - s)} ||eta f||^2
  double ratio = 0.0;
};

struct BernsteinMonitor {
  double a = 0.0;
  double n = 0.0;
  double c1 = 0.0;
  double eta_f_sup = 0.0;
  std::vector<BernsteinFrame> frames;
  double max_ratio = 0.0;
  /// Third derivatives disagree by more than 10% with the 2h mesh on the last frame.
  bool derivative_noise = false;
  double min_v = 0.0;
};

struct BernsteinOptions {
  double a = -1.0;  ///< <= 0 selects 0.01 min(1, nu0) / (1 + T^3)
  double n = 8.0;   ///< cutoff radius; the Dirichlet problem lives on B(0, n)
  double s = 0.0;
  double t_end = 1.0;
  double h = 1.0 / 64.0;
  double tau = 1e-2;
  Scheme scheme = Scheme::CrankNicolson;
  std::vector<double> output_times;  ///< empty keeps every step
};

double default_bernstein_weight(const OperatorSpec& op);

/// Solves D_t u = A u on B(0, n) with u(s) = eta f and monitors
///   v = u^2 + a(t-s) eta^2 |Du|^2 + a^2 (t-s)^2 eta^4 |D^2 u|^2 + a^3 (t-s)^3 eta^6 |D^3 u|^2
/// against e^{c1 (t-s)} ||eta f||^2 with c1 = 2 c0 + T (1 + T + T^2).
BernsteinMonitor bernstein_monitor(const OperatorSpec& op, const Datum& f, const BernsteinOptions& opts);

}  // namespace schauder
