#include "schauder/time_profile.hpp"

#include "schauder/mollification.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace schauder {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_increasing(const std::vector<double>& v, const char* what) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] > v[k - 1])) throw std::invalid_argument(std::string(what) + " must be strictly increasing");
}

}  // namespace

TimeProfile::TimeProfile(Repr r) : repr_(std::move(r)) {}

TimeProfile TimeProfile::piecewise_constant(std::vector<double> jumps, std::vector<double> values) {
  if (values.size() != jumps.size() + 1)
    throw std::invalid_argument("piecewise_constant profile needs one more value than jumps");
  require_increasing(jumps, "jump times");
  return TimeProfile(PiecewiseConstant{std::move(jumps), std::move(values)});
}

TimeProfile TimeProfile::piecewise_linear(std::vector<double> knots, std::vector<double> values) {
  if (knots.empty() || knots.size() != values.size())
    throw std::invalid_argument("piecewise_linear profile needs matching knots and values");
  require_increasing(knots, "knots");
  return TimeProfile(PiecewiseLinear{std::move(knots), std::move(values)});
}

TimeProfile TimeProfile::sampler(std::function<double(double)> fn, std::vector<double> breakpoints, double bound) {
  require_increasing(breakpoints, "breakpoints");
  return TimeProfile(Sampler{std::move(fn), std::move(breakpoints), bound, {}});
}

TimeProfile TimeProfile::mollified(const TimeProfile& source, double n, double horizon) {
  if (n < 1.0) throw std::invalid_argument("mollification index must be >= 1");
  return TimeProfile(Mollified{std::make_shared<const TimeProfile>(source), n, horizon});
}

double TimeProfile::operator()(double t) const {
  return std::visit(
      overloaded{
          [](const Constant& c) { return c.value; },
          [t](const Sinusoid& s) { return s.offset + s.amplitude * std::sin(s.omega * t + s.phase); },
          [t](const PiecewiseConstant& p) {
            const auto it = std::upper_bound(p.jumps.begin(), p.jumps.end(), t);
            return p.values[static_cast<std::size_t>(it - p.jumps.begin())];
          },
          [t](const PiecewiseLinear& p) {
            if (t <= p.knots.front()) return p.values.front();
            if (t >= p.knots.back()) return p.values.back();
            const auto it = std::upper_bound(p.knots.begin(), p.knots.end(), t);
            const std::size_t k = static_cast<std::size_t>(it - p.knots.begin());
            const double w = (t - p.knots[k - 1]) / (p.knots[k] - p.knots[k - 1]);
            return (1.0 - w) * p.values[k - 1] + w * p.values[k];
          },
          [t](const Sampler& s) { return s.fn(t); },
          [t](const Mollified& m) { return gaussian_mollify(*m.source, m.n, t, m.horizon); },
      },
      repr_);
}

std::vector<double> TimeProfile::breakpoints() const {
  return std::visit(overloaded{
                        [](const Constant&) { return std::vector<double>{}; },
                        [](const Sinusoid&) { return std::vector<double>{}; },
                        [](const PiecewiseConstant& p) { return p.jumps; },
                        [](const PiecewiseLinear& p) { return p.knots; },
                        [](const Sampler& s) { return s.breakpoints; },
                        [](const Mollified&) { return std::vector<double>{}; },
                    },
                    repr_);
}

std::vector<double> TimeProfile::jumps() const {
  if (const auto* p = std::get_if<PiecewiseConstant>(&repr_)) return p->jumps;
  if (const auto* s = std::get_if<Sampler>(&repr_)) return s->breakpoints;
  return {};
}

double TimeProfile::sup_abs(double horizon) const {
  const auto [lo, hi] = range(horizon);
  return std::max(std::abs(lo), std::abs(hi));
}

std::pair<double, double> TimeProfile::range(double horizon) const {
  return std::visit(
      overloaded{
          [](const Constant& c) { return std::pair{c.value, c.value}; },
          [horizon](const Sinusoid& s) {
            // Dense sampling plus the analytic extrema when they fall inside [0, T].
            double lo = s.offset + s.amplitude * std::sin(s.phase);
            double hi = lo;
            const int m = 4096;
            for (int k = 0; k <= m; ++k) {
              const double v = s.offset + s.amplitude * std::sin(s.omega * horizon * k / m + s.phase);
              lo = std::min(lo, v);
              hi = std::max(hi, v);
            }
            if (s.omega * horizon >= 2.0 * M_PI) {
              lo = std::min(lo, s.offset - std::abs(s.amplitude));
              hi = std::max(hi, s.offset + std::abs(s.amplitude));
            }
            return std::pair{lo, hi};
          },
          [horizon](const PiecewiseConstant& p) {
            double lo = p.values.front(), hi = lo;
            for (std::size_t k = 0; k < p.values.size(); ++k) {
              const double a = k == 0 ? 0.0 : p.jumps[k - 1];
              if (a > horizon) break;
              lo = std::min(lo, p.values[k]);
              hi = std::max(hi, p.values[k]);
            }
            return std::pair{lo, hi};
          },
          [](const PiecewiseLinear& p) {
            const auto [lo, hi] = std::minmax_element(p.values.begin(), p.values.end());
            return std::pair{*lo, *hi};
          },
          [horizon](const Sampler& s) {
            double lo = s.fn(0.0), hi = lo;
            const int m = 4096;
            for (int k = 0; k <= m; ++k) {
              const double v = s.fn(horizon * k / m);
              lo = std::min(lo, v);
              hi = std::max(hi, v);
            }
            return std::pair{lo, hi};
          },
          [](const Mollified& m) {
            // Positive kernel of mass <= 1: values stay inside [min(0, lo), max(0, hi)].
            const auto [lo, hi] = m.source->range(m.horizon);
            return std::pair{std::min(0.0, lo), std::max(0.0, hi)};
          },
      },
      repr_);
}

nlohmann::json TimeProfile::to_json() const {
  using nlohmann::json;
  return std::visit(overloaded{
                        [](const Constant& c) { return json{{"profile", "constant"}, {"value", c.value}}; },
                        [](const Sinusoid& s) {
                          return json{{"profile", "sinusoid"},
                                      {"offset", s.offset},
                                      {"amplitude", s.amplitude},
                                      {"omega", s.omega},
                                      {"phase", s.phase}};
                        },
                        [](const PiecewiseConstant& p) {
                          return json{{"profile", "piecewise_constant"}, {"jumps", p.jumps}, {"values", p.values}};
                        },
                        [](const PiecewiseLinear& p) {
                          return json{{"profile", "piecewise_linear"}, {"knots", p.knots}, {"values", p.values}};
                        },
                        [](const Sampler& s) {
                          if (!s.spec.is_null()) return s.spec;
                          return json{{"profile", "sampler"}, {"breakpoints", s.breakpoints}, {"bound", s.bound}};
                        },
                        [](const Mollified& m) {
                          return json{{"profile", "mollified"}, {"n", m.n}, {"source", m.source->to_json()}};
                        },
                    },
                    repr_);
}

TimeProfile TimeProfile::from_json(const nlohmann::json& j) {
  if (j.is_number()) return constant(j.get<double>());
  const std::string kind = j.at("profile").get<std::string>();
  if (kind == "constant") return constant(j.at("value").get<double>());
  if (kind == "sinusoid")
    return sinusoid(j.value("offset", 0.0), j.value("amplitude", 0.0), j.value("omega", 1.0), j.value("phase", 0.0));
  if (kind == "piecewise_constant")
    return piecewise_constant(j.at("jumps").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
  if (kind == "piecewise_linear")
    return piecewise_linear(j.at("knots").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
  if (kind == "sampler") {
    // Tabulated sampler: values at uniform spacing 1/samples_per_unit, held
    // constant to the right of each sample.
    const double per_unit = j.at("samples_per_unit").get<double>();
    auto values = j.at("values").get<std::vector<double>>();
    if (values.empty() || per_unit <= 0.0) throw std::invalid_argument("sampler profile needs values");
    std::vector<double> jumps;
    for (std::size_t k = 1; k < values.size(); ++k) jumps.push_back(static_cast<double>(k) / per_unit);
    return piecewise_constant(std::move(jumps), std::move(values));
  }
  if (kind == "exponential") {
    const double a = j.value("amplitude", 1.0), rate = j.value("rate", -1.0);
    TimeProfile out = sampler([a, rate](double t) { return a * std::exp(rate * t); }, {}, std::abs(a));
    std::get<Sampler>(out.repr_).spec = j;
    return out;
  }
  throw std::invalid_argument("unknown time profile kind: " + kind);
}

}  // namespace schauder
