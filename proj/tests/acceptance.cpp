// Acceptance suite: one PASS/FAIL line per criterion, driven from the bundled presets.
#include "schauder/experiment.hpp"
#include "schauder/holder_norms.hpp"
#include "schauder/hypotheses.hpp"
#include "schauder/mollification.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace schauder;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path kRoot = fs::current_path() / "acceptance_runs";

fs::path run_dir(const std::string& preset, const std::string& kind, const std::string& suffix = "") {
  return kRoot / (preset + "-" + kind + suffix);
}

RunManifest run_preset(const std::string& preset, const std::string& kind,
                       const std::function<void(ExperimentConfig&)>& tweak = {}, const std::string& suffix = "") {
  ExperimentConfig c = preset_config(preset, kind);
  if (tweak) tweak(c);
  c.out = run_dir(preset, kind, suffix);
  if (fs::exists(c.out / kRunMarker)) fs::remove_all(c.out);
  return run(c);
}

const StageStatus* stage(const RunManifest& m, const std::string& name) {
  for (const auto& s : m.stages)
    if (s.name == name) return &s;
  return nullptr;
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

std::vector<std::vector<double>> read_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) r.push_back(std::stod(cell));
    rows.push_back(r);
  }
  return rows;
}

// 1 ------------------------------------------------------------------------
Outcome heat_kernel_oracle() {
  DirichletProblem p;
  p.op = resolve_operator("heat-1d");
  p.radius = 8.0;
  p.h = 1.0 / 128;
  p.tau = 1e-3;
  p.t_end = 1.0;
  p.f = [](const Point& x) { return std::exp(-x.squaredNorm()); };
  p.output_times = {0.1, 0.5, 1.0};
  const Trajectory traj = solve_dirichlet(p);
  double worst = 0.0;
  for (const double t : p.output_times) {
    const GridFunction& u = traj.at(t);
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      const double x = u.point(k)[0];
      if (std::abs(x) > 2.0) continue;
      const double exact = std::exp(-x * x / (1.0 + 4.0 * t)) / std::sqrt(1.0 + 4.0 * t);
      worst = std::max(worst, std::abs(u[k] - exact));
    }
  }
  return {worst <= 1e-3, "max error " + sci(worst) + " (tol 1e-3)"};
}

// 2, 3 ----------------------------------------------------------------------
std::vector<std::pair<std::string, RunManifest>> solve_corpus() {
  std::vector<std::pair<std::string, RunManifest>> out;
  for (const auto& p : kPresets) out.emplace_back(p, run_preset(p, "solve"));
  return out;
}

Outcome sup_bound(const std::vector<std::pair<std::string, RunManifest>>& corpus) {
  bool ok = true;
  std::string detail;
  for (const auto& [name, m] : corpus) {
    const StageStatus* s = stage(m, "sup_bound");
    const bool pass = s && s->pass;
    ok = ok && pass;
    detail += name + (pass ? " ok" : " FAILED") + "; ";
  }
  return {ok, detail};
}

Outcome monotone(const std::vector<std::pair<std::string, RunManifest>>& corpus) {
  bool ok = true;
  std::string detail;
  for (const auto& [name, m] : corpus) {
    const StageStatus* s = stage(m, "monotone_convergence");
    const StageStatus* e = stage(m, "expanding_ball");
    const bool pass = s && s->pass && e && e->pass;
    ok = ok && pass;
    detail += name + (pass ? " ok" : " FAILED") + "; ";
  }
  return {ok, detail};
}

// 4, 5 ----------------------------------------------------------------------
Outcome smoothing(const RunManifest& heat) {
  bool ok = true;
  std::string detail;
  for (const char* pair : {"smoothing(0,1)", "smoothing(0,2)", "smoothing(1,2)", "smoothing(0,3)"}) {
    const StageStatus* s = stage(heat, pair);
    ok = ok && s && s->pass;
    detail += std::string(pair) + ": " + (s ? s->detail : "missing") + "; ";
  }
  return {ok, detail};
}

Outcome bernstein(const RunManifest& heat, const RunManifest& ou) {
  const StageStatus* a = stage(heat, "bernstein");
  const StageStatus* b = stage(ou, "bernstein");
  return {a && a->pass && b && b->pass,
          "heat: " + (a ? a->detail : "missing") + "; OU: " + (b ? b->detail : "missing")};
}

// 6, 7 ----------------------------------------------------------------------
Outcome voc(const RunManifest& a, const RunManifest& b) {
  const StageStatus* x = stage(a, "voc_consistency");
  const StageStatus* y = stage(b, "voc_consistency");
  return {x && x->pass && y && y->pass,
          "heat-1d: " + (x ? x->detail : "missing") + "; ou-1d: " + (y ? y->detail : "missing")};
}

Outcome schauder_stability(const RunManifest& a, const RunManifest& b) {
  const StageStatus* x = stage(a, "schauder_refinement");
  const StageStatus* y = stage(b, "schauder_refinement");
  return {x && x->pass && y && y->pass,
          "heat-1d: " + (x ? x->detail : "missing") + "; ou-1d: " + (y ? y->detail : "missing")};
}

// 8 -------------------------------------------------------------------------
Outcome mollifier_floor() {
  std::mt19937_64 rng(2024);
  int checked = 0;
  double worst = INFINITY;
  for (const char* preset : {"two-stage-heat", "sect4-example-measurable"}) {
    const OperatorSpec op = resolve_operator(preset);
    const double horizon = op.horizon();
    const double floor = nu_floor(op.nu0, horizon);
    std::uniform_real_distribution<double> t(0.0, horizon), x(-4.0, 4.0), logn(0.0, std::log(1e4));
    for (int k = 0; k < 5000; ++k) {
      const MollifiedOperator m(op, std::exp(logn(rng)));
      const double margin = m.nu_n(t(rng), Point::Constant(1, x(rng))) - floor;
      worst = std::min(worst, margin);
      ++checked;
    }
  }
  return {worst >= -1e-8, std::to_string(checked) + " samples, min nu_n - floor = " + sci(worst)};
}

// 9 -------------------------------------------------------------------------
Outcome jensen() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> v(-3.0, 3.0), t(0.0, 1.0), logn(0.0, std::log(1e4));
  double worst = INFINITY;
  for (int k = 0; k < 2000; ++k) {
    std::vector<double> jumps, values{v(rng)};
    const int pieces = 1 + static_cast<int>(rng() % 6);
    for (int j = 1; j < pieces; ++j) jumps.push_back(static_cast<double>(j) / pieces + 0.01 * v(rng));
    for (int j = 1; j < pieces; ++j) values.push_back(v(rng));
    const TimeProfile rho = TimeProfile::piecewise_constant(jumps, values);
    worst = std::min(worst, jensen_gap(rho, std::exp(logn(rng)), t(rng), 1.0));
  }
  // Same direction inside the preservation check on the measurable example.
  CompatConstants c;
  const PreservationReport rep =
      hypothesis_preservation_check(resolve_operator("sect4-example-measurable"), c, {1.0, 16.0, 256.0}, 4.0, 500);
  for (const auto& row : rep.rows) worst = std::min(worst, row.jensen_margin);
  return {worst >= -1e-10, "min of mollify(rho^2) - (mollify rho)^2 = " + sci(worst)};
}

// 10 ------------------------------------------------------------------------
Outcome two_stage(const RunManifest& m, const fs::path& dir) {
  const StageStatus* inc = stage(m, "increments_monotone");
  const StageStatus* res = stage(m, "residual_bound");
  const StageStatus* orc = stage(m, "oracle");
  std::string detail;
  for (const auto& r : read_rows(dir / "convergence.csv")) detail += "n=" + sci(r[0]) + " inc " + sci(r[1]) + ", ";
  detail += orc ? orc->detail : "oracle missing";
  detail += "; " + (res ? res->detail : "residual missing");
  return {inc && inc->pass && res && res->pass && orc && orc->pass, detail};
}

// 11 ------------------------------------------------------------------------
Outcome hypotheses() {
  const RunManifest m = run_preset("sect4-example-continuous", "check-hypotheses");
  const RunManifest big = run_preset(
      "sect4-example-continuous", "check-hypotheses", [](ExperimentConfig& c) { c.box_radius *= 2.0; }, "-box8");
  auto load = [](const fs::path& dir) {
    std::ifstream in(dir / "hypotheses.json");
    return HypothesisReport::from_json(json::parse(in));
  };
  const HypothesisReport a = load(run_dir("sect4-example-continuous", "check-hypotheses"));
  const HypothesisReport b = load(run_dir("sect4-example-continuous", "check-hypotheses", "-box8"));

  // Fitted hypothesis constants. The records also carry raw sample extrema
  // (d_max, r_max, rho_max) and fit ratios, which grow with the box for
  // polynomial coefficients; their drift is reported but not judged.
  static const std::set<std::string> fitted{"nu_min", "C1",     "C2",     "C3",     "c_max",        "K1",
                                            "K2",     "K2_form", "K3",    "L1",     "L2",           "L3",
                                            "rho0",   "lambda", "lyapunov_sup", "kappa3", "p", "q"};
  bool finite = true;
  double drift = 0.0, raw_drift = 0.0;
  std::string worst_name = "all equal", raw_name = "all equal";
  for (const auto& cond : a.conditions) {
    const ConditionRecord* other = b.try_find(cond.id);
    for (const auto& [k, v] : cond.constants) {
      finite = finite && std::isfinite(v);
      if (!other) continue;
      const double d = std::abs(other->constants.at(k) - v) / std::max(std::abs(v), 1e-9);
      double& worst = fitted.contains(k) ? drift : raw_drift;
      if (d > worst) {
        worst = d;
        (fitted.contains(k) ? worst_name : raw_name) = cond.id + "." + k;
      }
    }
  }

  json mutant = preset_operator("ou-1d");
  mutant["p"] = 2;
  mutant["q"] = 1;
  mutant["r"] = 1;
  mutant["b0"] = -0.5;
  mutant["c0"] = 0.0;
  mutant["unchecked"] = true;
  mutant["name"] = "p>q mutant";
  ExperimentConfig mc;
  mc.kind = "check-hypotheses";
  mc.op = mutant;
  mc.out = kRoot / "mutant-check-hypotheses";
  if (fs::exists(mc.out / kRunMarker)) fs::remove_all(mc.out);
  const RunManifest mm = run(mc);
  const HypothesisReport mr = load(mc.out);
  const ConditionRecord* order = mr.try_find("exponent_order");
  const bool mutant_fails = !mm.pass && order && order->verdict == Verdict::Fail && order->witness.x.size() == 1;

  const bool ok = m.pass && big.pass && finite && drift <= 0.05 && mutant_fails;
  return {ok, std::string("preset ") + (m.pass ? "passes" : "FAILS") + " at box 4 and " +
                  (big.pass ? "passes" : "FAILS") + " at box 8; largest constant drift " + sci(drift) + " (" +
                  worst_name + "), raw extrema drift " + sci(raw_drift) + " (" + raw_name + "); mutant " + (mutant_fails ? "fails exponent_order with a witness" : "NOT rejected")};
}

// 12 ------------------------------------------------------------------------
Outcome interpolation() {
  std::vector<std::function<double(double)>> corpus;
  for (const double k : {0.5, 1.0, 2.0, 3.0}) corpus.push_back([k](double x) { return std::sin(k * x); });
  for (const double w : {0.5, 0.75, 1.0, 2.0}) corpus.push_back([w](double x) { return std::exp(-x * x / (w * w)); });
  for (const double s : {0.5, 1.0, 2.0}) corpus.push_back([s](double x) { return std::tanh(x / s); });
  for (const double a : {1.0, 2.0}) corpus.push_back([a](double x) { return x * x * std::exp(-a * x * x); });
  corpus.push_back([](double x) { return std::cos(x) * std::exp(-x * x / 4.0); });
  corpus.push_back([](double x) { return 1.0 / (1.0 + x * x); });
  corpus.push_back([](double x) { return std::atan(2.0 * x); });
  corpus.push_back([](double x) { return x * std::exp(-x * x); });
  corpus.push_back([](double x) { return std::pow(1.0 + x * x, 1.5) * std::exp(-x * x); });
  corpus.push_back([](double x) { return std::sin(x) + 0.5 * std::cos(3.0 * x); });
  corpus.push_back([](double) { return 1.0; });
  const double theta = 0.5, r_eval = 2.0;
  double lo = INFINITY, hi = 0.0, change = 0.0;
  bool finite = true;
  for (const auto& f : corpus) {
    std::array<double, 2> r{};
    for (int level = 0; level < 2; ++level) {
      const GridFunction g =
          GridFunction::sample(1, 4.0, std::ldexp(1.0 / 64, -level), [&f](const Point& x) { return f(x[0]); });
      r[static_cast<std::size_t>(level)] = interpolation_inequality_check(g, theta, r_eval);
    }
    finite = finite && std::isfinite(r[0]) && std::isfinite(r[1]) && r[0] > 0.0;
    lo = std::min(lo, r[1]);
    hi = std::max(hi, r[1]);
    change = std::max(change, std::abs(r[1] - r[0]) / r[0]);
  }
  // Single constant: every ratio lies below 2, and moves by at most 10% under h -> h/2.
  return {finite && hi <= 2.0 && change <= 0.1,
          std::to_string(corpus.size()) + " functions, ratios in [" + sci(lo) + ", " + sci(hi) +
              "], largest refinement change " + sci(change)};
}

}  // namespace

int main() {
  fs::create_directories(kRoot);
  int failed = 0;
  auto report_line = [&failed](int id, const std::string& title, const Outcome& o) {
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ". " << title << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  };
  auto guarded = [](const std::function<Outcome()>& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  const auto start = std::chrono::steady_clock::now();
  report_line(1, "heat-kernel oracle", guarded(heat_kernel_oracle));
  std::vector<std::pair<std::string, RunManifest>> corpus;
  const Outcome corpus_status = guarded([&] {
    corpus = solve_corpus();
    return Outcome{true, ""};
  });
  report_line(2, "sup-norm bound over the preset corpus", corpus_status.pass ? sup_bound(corpus) : corpus_status);
  report_line(3, "monotone expanding-ball convergence", corpus_status.pass ? monotone(corpus) : corpus_status);

  RunManifest heat_s, ou_s;
  const Outcome smoothing_runs = guarded([&] {
    heat_s = run_preset("heat-1d", "smoothing");
    ou_s = run_preset("ou-1d", "smoothing");
    return Outcome{true, ""};
  });
  report_line(4, "smoothing exponents", smoothing_runs.pass ? smoothing(heat_s) : smoothing_runs);
  report_line(5, "Bernstein bound", smoothing_runs.pass ? bernstein(heat_s, ou_s) : smoothing_runs);

  RunManifest heat_f, ou_f;
  const Outcome forced_runs = guarded([&] {
    heat_f = run_preset("heat-1d", "schauder");
    ou_f = run_preset("ou-1d", "schauder");
    return Outcome{true, ""};
  });
  report_line(6, "variation-of-constants consistency", forced_runs.pass ? voc(heat_f, ou_f) : forced_runs);
  report_line(7, "Schauder ratio stability", forced_runs.pass ? schauder_stability(heat_f, ou_f) : forced_runs);

  report_line(8, "mollifier ellipticity floor", guarded(mollifier_floor));
  report_line(9, "Jensen direction", guarded(jensen));
  report_line(10, "two-stage heat convergence", guarded([] {
                const RunManifest m = run_preset("two-stage-heat", "mollify-study");
                return two_stage(m, kRoot / "two-stage-heat-mollify-study");
              }));
  report_line(11, "hypothesis checker", guarded(hypotheses));
  report_line(12, "interpolation inequalities", guarded(interpolation));

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << (failed == 0 ? "all 12 criteria passed" : std::to_string(failed) + " criteria failed") << " in "
            << sci(secs) << " s" << std::endl;
  return failed == 0 ? 0 : 1;
}
