#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace schauder {

/// Scalar function of time on [0, T] used to modulate coefficient terms.
///
/// Piecewise-constant profiles are right-continuous; their jump times are the
/// only points where a.e. statements may fail. A mollified profile keeps a
/// reference to its source and evaluates the Gaussian time average on demand.
class TimeProfile {
 public:
  struct Constant {
    double value = 1.0;
  };
  /// offset + amplitude * sin(omega t + phase)
  struct Sinusoid {
    double offset = 0.0;
    double amplitude = 0.0;
    double omega = 1.0;
    double phase = 0.0;
  };
  /// values[k] on [jumps[k-1], jumps[k]); jumps strictly increasing inside (0, T).
  struct PiecewiseConstant {
    std::vector<double> jumps;
    std::vector<double> values;
  };
  /// Linear interpolation between knots (constant extrapolation).
  struct PiecewiseLinear {
    std::vector<double> knots;
    std::vector<double> values;
  };
  /// Arbitrary bounded sampler with declared breakpoints.
  struct Sampler {
    std::function<double(double)> fn;
    std::vector<double> breakpoints;
    double bound = 0.0;
    nlohmann::json spec;  ///< serialized form, when the sampler came from JSON
  };
  struct Mollified {
    std::shared_ptr<const TimeProfile> source;
    double n = 1.0;
    double horizon = 1.0;
  };

  using Repr = std::variant<Constant, Sinusoid, PiecewiseConstant, PiecewiseLinear, Sampler, Mollified>;

  TimeProfile() : repr_(Constant{1.0}) {}
  explicit TimeProfile(Repr r);

  static TimeProfile constant(double v) { return TimeProfile(Constant{v}); }
  static TimeProfile sinusoid(double offset, double amplitude, double omega, double phase = 0.0) {
    return TimeProfile(Sinusoid{offset, amplitude, omega, phase});
  }
  static TimeProfile piecewise_constant(std::vector<double> jumps, std::vector<double> values);
  static TimeProfile piecewise_linear(std::vector<double> knots, std::vector<double> values);
  static TimeProfile sampler(std::function<double(double)> fn, std::vector<double> breakpoints, double bound);
  /// Gaussian time mollification of `source` with index n over [0, horizon].
  static TimeProfile mollified(const TimeProfile& source, double n, double horizon);

  double operator()(double t) const;

  [[nodiscard]] bool is_constant() const { return std::holds_alternative<Constant>(repr_); }
  [[nodiscard]] bool is_piecewise_constant() const {
    return is_constant() || std::holds_alternative<PiecewiseConstant>(repr_);
  }
  /// Points where the profile may be discontinuous (or non-smooth).
  [[nodiscard]] std::vector<double> breakpoints() const;
  /// Jump times (discontinuities only).
  [[nodiscard]] std::vector<double> jumps() const;
  /// Upper bound of |profile| over [0, horizon].
  [[nodiscard]] double sup_abs(double horizon) const;
  /// Supremum and infimum over [0, horizon] (dense sampling for smooth kinds).
  [[nodiscard]] std::pair<double, double> range(double horizon) const;

  [[nodiscard]] const Repr& repr() const { return repr_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static TimeProfile from_json(const nlohmann::json& j);

 private:
  Repr repr_;
};

}  // namespace schauder
