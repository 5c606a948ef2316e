#pragma once

#include "schauder/jet.hpp"
#include "schauder/time_profile.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace schauder {

/// Spatial factor of a coefficient term. `analytic == false` means only the
/// value is meaningful and derivatives come from the finite-difference fallback.
struct SpatialField {
  std::function<ScalarJet(const Point&, int order)> eval;
  bool analytic = true;
  std::string label;
};

namespace fields {
SpatialField constant(double v);
/// (1 + |x|^2)^p
SpatialField poly_weight(int p);
/// |x|^{2r}
SpatialField even_power(int r);
/// exp(-|x|^2 / width^2)
SpatialField gaussian(double width = 1.0);
/// x_j
SpatialField coordinate(int j);
/// Pointwise product of two fields.
SpatialField product(SpatialField a, SpatialField b);
/// a + b
SpatialField sum(SpatialField a, SpatialField b);
/// scale * a
SpatialField scaled(double scale, SpatialField a);
/// Value-only field (derivatives by finite differences).
SpatialField sampled(std::function<double(const Point&)> fn, std::string label = "sampled");
}  // namespace fields

enum class CoefficientSlot { Diffusion, Drift, Potential };

/// One separable contribution profile(t) * field(x) to q_ij, b_j or c.
/// Off-diagonal diffusion terms are mirrored to keep Q symmetric.
struct CoefficientTerm {
  CoefficientSlot slot = CoefficientSlot::Potential;
  int i = 0;
  int j = 0;
  TimeProfile profile;
  SpatialField field;
};

/// All coefficients and their spatial derivatives at one (t, x).
struct CoefficientSample {
  int dim = 1;
  int order = 0;
  std::array<std::array<ScalarJet, kMaxDim>, kMaxDim> q;
  std::array<ScalarJet, kMaxDim> b;
  ScalarJet c;

  CoefficientSample() = default;
  CoefficientSample(int n, int ord);

  [[nodiscard]] SmallMatrix diffusion() const;
  [[nodiscard]] Point drift() const;
  /// Db(i, j) = D_j b_i
  [[nodiscard]] SmallMatrix drift_jacobian() const;
  [[nodiscard]] double potential() const { return c.value; }
};

struct LyapunovPair {
  std::function<ScalarJet(const Point&, int order)> phi;
  double lambda = 1.0;
  std::string label;
};

/// Exponent data of the polynomial-growth family, kept for degree comparisons.
struct PolyExponents {
  int dim = 1;
  int p = 0;
  int q = 0;
  int r = 0;
  double q0_norm = 0.0;  ///< sup ||Q0||
  double b0_sup = 0.0;   ///< sup_t b0(t) (< 0 for admissible specs)
  double c0_sup = 0.0;   ///< sup |c0|
  double nu0 = 0.0;
  double kappa3 = 0.0;
};

/// Second-order operator  A u = sum q_ij D_ij u + sum b_j D_j u + c u  on [0,T] x R^N.
///
/// Immutable after construction; every evaluator is pure and the spec may be
/// shared across threads.
class OperatorSpec {
 public:
  OperatorSpec() = default;
  OperatorSpec(int dim, double horizon, std::vector<CoefficientTerm> terms);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] const std::vector<CoefficientTerm>& terms() const { return terms_; }

  /// Coefficients with derivatives to `order` (<= 3). Analytic fields use their
  /// own jets; value-only fields use 4th-order central differences with step
  /// fd_scale * 1e-3 * (1 + |x|).
  [[nodiscard]] CoefficientSample evaluate(double t, const Point& x, int order, double fd_scale = 1.0) const;

  [[nodiscard]] bool analytic() const;
  [[nodiscard]] bool time_independent() const;
  /// Union of all coefficient jump times.
  [[nodiscard]] std::vector<double> jumps() const;

  double nu0 = 0.0;  ///< declared ellipticity floor (0 when unknown)
  double c0 = 0.0;   ///< declared potential ceiling
  std::optional<LyapunovPair> lyapunov;
  std::optional<PolyExponents> poly;
  std::string name;
  nlohmann::json source;  ///< configuration this operator was built from (hashing/provenance)

 private:
  int dim_ = 1;
  double horizon_ = 1.0;
  std::vector<CoefficientTerm> terms_;
};

// ---------------------------------------------------------------------------
// Families

/// Regime of the polynomial-growth family: continuous-in-time data or
/// measurable (piecewise) data with b0 <= b0_max < 0 almost everywhere.
enum class TimeRegime { Continuous, Measurable };

struct PolyExampleSpec {
  int dim = 1;
  double horizon = 1.0;
  int p = 0;
  int q = 0;
  int r = 0;
  SmallMatrix q0_matrix = SmallMatrix::Identity(1, 1);  ///< constant SPD factor of Q0
  TimeProfile q0_profile = TimeProfile::constant(1.0);  ///< positive time factor of Q0
  double q0_modulation = 0.0;  ///< Q0 *= (1 + a exp(-|x|^2)), |a| < 1
  TimeProfile b0 = TimeProfile::constant(-1.0);
  TimeProfile c0_base = TimeProfile::constant(0.0);
  double c0_bump = 0.0;  ///< c0(t,x) = c0_base(t) + c0_bump exp(-|x|^2)
  TimeRegime regime = TimeRegime::Continuous;
};

/// q_ij = (1+|x|^2)^p Q0_ij,  b_j = b0(t) x_j (1+|x|^2)^q,  c = c0 - |x|^{2r}.
/// Lyapunov pair phi = 1 + |x|^2, lambda = ||c0||_inf + kappa3.
/// Throws std::invalid_argument("p ≤ q violated") and on nonnegative b0 samples.
OperatorSpec build_poly_example(const PolyExampleSpec& spec);
/// Same construction without admissibility checks (used to build mutants).
OperatorSpec build_poly_example_unchecked(const PolyExampleSpec& spec);

/// Sup over radii of 2N||Q0||(1+rho^2)^p + 2 b0 rho^2 (1+rho^2)^q - rho^{2r}(1+rho^2) on [0, rho_max].
struct Kappa3Fit {
  double sup = 0.0;
  double argmax = 0.0;
};
Kappa3Fit fit_kappa3(const PolyExponents& e, double rho_max, int samples = 20001);

/// Constant-coefficient diffusion with affine drift:
///   Q = q_matrix * q_profile(t),  b = b_profile(t) (B x + v),  c = c_profile(t) * c.
struct LinearDriftSpec {
  int dim = 1;
  double horizon = 1.0;
  SmallMatrix q_matrix = SmallMatrix::Identity(1, 1);
  TimeProfile q_profile = TimeProfile::constant(1.0);
  SmallMatrix drift_matrix = SmallMatrix::Zero(1, 1);
  Point drift_offset = Point::Zero(1);
  TimeProfile drift_profile = TimeProfile::constant(1.0);
  double potential = 0.0;
  TimeProfile potential_profile = TimeProfile::constant(1.0);
  /// lambda paired with phi = 1 + |x|^2; defaults to max(c0, 0) + 1.
  std::optional<double> lyapunov_lambda;
};
OperatorSpec build_linear_drift(const LinearDriftSpec& spec);

/// Coefficients tabulated on a uniform spatial grid at given times; linear in
/// time, tensor Lagrange interpolation of order 1 or 3 in space.
struct TabulatedSpec {
  int dim = 1;
  double horizon = 1.0;
  std::vector<double> times;
  double x_min = -1.0;
  double x_max = 1.0;
  int nodes = 2;           ///< per axis
  int interpolation = 1;   ///< 1 or 3
  /// values[slot_index][time][node]; slot order q11, (q12, q22), b1, (b2), c.
  std::vector<std::vector<std::vector<double>>> values;
};
OperatorSpec build_tabulated(const TabulatedSpec& spec);

/// Loads an operator from the JSON document format
/// {"family": "poly_example" | "linear_drift" | "custom_tabulated", "N": .., "T": .., ...}.
OperatorSpec operator_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Pointwise quantities

/// Tight ellipticity function nu(t,x) = lambda_min(Q(t,x)).
double ellipticity(const OperatorSpec& op, double t, const Point& x);

/// Largest eigenvalue of the symmetrized drift Jacobian, the tight d(t,x).
double dissipativity_bound(const OperatorSpec& op, double t, const Point& x);

/// max over |beta| = 2,3 and j of |D^beta b_j|.
double drift_derivative_bound(const CoefficientSample& s);
/// max over |gamma| = 1,2,3 of |D^gamma c|.
double potential_derivative_bound(const CoefficientSample& s);
/// Largest eigenvalue of Xi -> sum D_lm q_hk xi_hk xi_lm over unit symmetric Xi.
double diffusion_hessian_form_bound(const CoefficientSample& s);

/// A phi at (t, x) for a function given by its jet.
double apply_to_jet(const CoefficientSample& s, const ScalarJet& phi);

class GridFunction;
/// Pointwise A u on the mesh, derivatives of u from the 4th-order stencils
/// (the margin of the result grows by two layers).
GridFunction apply_operator(const OperatorSpec& op, double t, const GridFunction& u);

}  // namespace schauder
