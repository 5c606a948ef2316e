#include "schauder/experiment.hpp"

#include "schauder/hypotheses.hpp"
#include "schauder/inhomogeneous.hpp"
#include "schauder/mollification.hpp"
#include "schauder/smoothing_lab.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace schauder {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kOracleTol = 5e-3;

// ---------------------------------------------------------------------------
// Small output helpers

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(const std::vector<std::string>& cells) { rows_.push_back(cells); }
  void row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    for (const double v : cells) s.push_back(fmt(v));
    rows_.push_back(std::move(s));
  }
  void write(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
      out << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  [[nodiscard]] std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ChecksumError("column " + name + " missing");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ChecksumError("cannot read " + path.string());
  Table t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    for (const auto& c : split(line)) r.push_back(std::stod(c));
    t.rows.push_back(std::move(r));
  }
  return t;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json strip_out(const ExperimentConfig& c) {
  json j = config_to_json(c);
  j.erase("out");
  return j;
}

// ---------------------------------------------------------------------------
// Config parsing helpers

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

bool is_kind(const std::string& k) {
  return std::find(kExperimentKinds.begin(), kExperimentKinds.end(), k) != kExperimentKinds.end();
}

bool is_preset(const std::string& k) { return std::find(kPresets.begin(), kPresets.end(), k) != kPresets.end(); }

void validate(const ExperimentConfig& c) {
  require(is_kind(c.kind), "unknown experiment kind: " + c.kind);
  require(!c.op.is_null(), "config needs an operator");
  require(c.h > 0.0 && c.tau > 0.0, "h and tau must be positive");
  require(c.t_end > c.s && c.s >= 0.0, "need 0 <= s < t_end");
  require(!c.radii.empty(), "radius ladder is empty");
  for (std::size_t k = 0; k < c.radii.size(); ++k)
    require(c.radii[k] > 0.0 && (k == 0 || c.radii[k] > c.radii[k - 1]), "radius ladder must increase");
  require(c.tol > 0.0, "tol must be positive");
  try {
    (void)scheme_from_string(c.scheme);
  } catch (const std::exception&) {
    throw ConfigError("unknown scheme: " + c.scheme);
  }
  require(c.r_eval > 0.0, "r_eval must be positive");
  require(c.box_radius > 0.0 && c.space_samples >= 8 && c.time_samples >= 2, "bad hypothesis sampling");
  for (const auto& p : c.pairs)
    require(p.alpha >= 0.0 && p.alpha <= p.beta && p.beta <= 3.0 && p.tol > 0.0, "bad smoothing pair");
  require(c.theta > 0.0 && c.theta < 1.0, "theta must lie in (0, 1)");
  require(c.refinement_tol > 0.0, "refinement_tol must be positive");
  require(!c.n_ladder.empty(), "n ladder is empty");
  for (const double n : c.n_ladder) require(n >= 1.0, "mollification indices must be >= 1");
  require(c.oracle.empty() || c.oracle == "composed_gaussian", "unknown oracle: " + c.oracle);
  require(c.bernstein_n > 0.0, "bernstein_n must be positive");
}

json pair_to_json(const SmoothingPair& p) {
  json j{{"alpha", p.alpha}, {"beta", p.beta}, {"tol", p.tol}};
  if (!p.datum.is_null()) j["datum"] = p.datum;
  return j;
}

SmoothingPair pair_from_json(const json& j) {
  require(j.is_object(), "smoothing pairs must be objects");
  SmoothingPair p;
  for (const auto& [key, v] : j.items()) {
    if (key == "alpha") p.alpha = get_as<double>(v, key);
    else if (key == "beta") p.beta = get_as<double>(v, key);
    else if (key == "tol") p.tol = get_as<double>(v, key);
    else if (key == "datum") p.datum = v;
    else throw ConfigError("unknown smoothing pair key: " + key);
  }
  return p;
}

std::vector<double> heat_smoothing_ladder() {
  std::vector<double> v;
  for (int i = 0; i < 6; ++i) v.push_back(0.0064 * std::ldexp(1.0, -i));
  std::sort(v.begin(), v.end());
  return v;
}

void apply_smoothing_defaults(ExperimentConfig& c, double tol_scale) {
  // A sharp step keeps every derivative large on the whole ladder; the C^1
  // kink realizes alpha = 1.
  const json step{{"kind", "tanh"}, {"scale", 0.002}};
  const json kink{{"kind", "kink"}, {"eps", 0.002}};
  c.datum = step;
  c.pairs = {{0.0, 1.0, 0.15 * tol_scale, json()},
             {0.0, 2.0, 0.15 * tol_scale, json()},
             {1.0, 2.0, 0.15 * tol_scale, kink},
             {0.0, 3.0, 0.25 * tol_scale, json()}};
  c.ladder = heat_smoothing_ladder();
  c.h = 1.0 / 1024.0;
  c.tau = c.ladder.front() / 80.0;
  c.r_eval = 1.0;
  c.radii = {4.0, 8.0};
}

void apply_schauder_defaults(ExperimentConfig& c) {
  // Zero datum: the ratio is then driven by the forcing alone.
  c.datum = {{"kind", "zero"}};
  c.source = json::array({{{"profile", {{"profile", "exponential"}, {"amplitude", 1.0}, {"rate", -1.0}}},
                           {"field", {{"kind", "sine"}, {"k", 1.0}}}}});
  c.h = 1.0 / 32.0;
  c.tau = 1.0 / 32.0;
  c.radii = {8.0, 16.0};
  c.tol = 1e-3;
  c.scheme = "crank_nicolson";
  c.output_times = {0.25, 0.5, 1.0};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

json config_to_json(const ExperimentConfig& c) {
  json pairs = json::array();
  for (const auto& p : c.pairs) pairs.push_back(pair_to_json(p));
  return json{{"kind", c.kind},
              {"preset", c.preset},
              {"operator", c.op},
              {"datum", c.datum},
              {"source", c.source},
              {"h", c.h},
              {"tau", c.tau},
              {"s", c.s},
              {"t_end", c.t_end},
              {"radii", c.radii},
              {"tol", c.tol},
              {"scheme", c.scheme},
              {"r_eval", c.r_eval},
              {"output_times", c.output_times},
              {"box_radius", c.box_radius},
              {"space_samples", c.space_samples},
              {"time_samples", c.time_samples},
              {"pairs", pairs},
              {"ladder", c.ladder},
              {"bernstein", c.bernstein},
              {"bernstein_n", c.bernstein_n},
              {"bernstein_datum", c.bernstein_datum},
              {"theta", c.theta},
              {"refinement_tol", c.refinement_tol},
              {"n_ladder", c.n_ladder},
              {"mollify_tol", c.mollify_tol},
              {"residual_bound", c.residual_bound},
              {"oracle", c.oracle},
              {"out", c.out.string()},
              {"seed", c.seed}};
}

ExperimentConfig config_from_json(const json& j) {
  require(j.is_object(), "config must be a JSON object");
  ExperimentConfig c;
  const std::string kind = j.contains("kind") ? get_as<std::string>(j.at("kind"), "kind") : "";
  if (j.contains("preset")) {
    const std::string name = get_as<std::string>(j.at("preset"), "preset");
    if (!name.empty()) {
      require(is_preset(name), "unknown preset: " + name);
      c = preset_config(name, kind);
    }
  }
  for (const auto& [key, v] : j.items()) {
    if (key == "kind") c.kind = get_as<std::string>(v, key);
    else if (key == "preset") c.preset = get_as<std::string>(v, key);
    else if (key == "operator") c.op = v;
    else if (key == "datum") c.datum = v;
    else if (key == "source") c.source = v;
    else if (key == "h") c.h = get_as<double>(v, key);
    else if (key == "tau") c.tau = get_as<double>(v, key);
    else if (key == "s") c.s = get_as<double>(v, key);
    else if (key == "t_end") c.t_end = get_as<double>(v, key);
    else if (key == "radii") c.radii = get_as<std::vector<double>>(v, key);
    else if (key == "tol") c.tol = get_as<double>(v, key);
    else if (key == "scheme") c.scheme = get_as<std::string>(v, key);
    else if (key == "r_eval") c.r_eval = get_as<double>(v, key);
    else if (key == "output_times") c.output_times = get_as<std::vector<double>>(v, key);
    else if (key == "box_radius") c.box_radius = get_as<double>(v, key);
    else if (key == "space_samples") c.space_samples = get_as<int>(v, key);
    else if (key == "time_samples") c.time_samples = get_as<int>(v, key);
    else if (key == "pairs") {
      require(v.is_array(), "pairs must be an array");
      c.pairs.clear();
      for (const auto& p : v) c.pairs.push_back(pair_from_json(p));
    } else if (key == "ladder") c.ladder = get_as<std::vector<double>>(v, key);
    else if (key == "bernstein") c.bernstein = get_as<bool>(v, key);
    else if (key == "bernstein_n") c.bernstein_n = get_as<double>(v, key);
    else if (key == "bernstein_datum") c.bernstein_datum = v;
    else if (key == "theta") c.theta = get_as<double>(v, key);
    else if (key == "refinement_tol") c.refinement_tol = get_as<double>(v, key);
    else if (key == "n_ladder") c.n_ladder = get_as<std::vector<double>>(v, key);
    else if (key == "mollify_tol") c.mollify_tol = get_as<double>(v, key);
    else if (key == "residual_bound") c.residual_bound = get_as<bool>(v, key);
    else if (key == "oracle") c.oracle = get_as<std::string>(v, key);
    else if (key == "out") c.out = get_as<std::string>(v, key);
    else if (key == "seed") {
      require(v.is_number_unsigned(), "seed must be a nonnegative integer");
      c.seed = v.get<std::uint64_t>();
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

json preset_operator(const std::string& name) {
  if (name == "heat-1d") return {{"family", "linear_drift"}, {"N", 1}, {"T", 1.0}, {"name", name}};
  if (name == "ou-1d")
    return {{"family", "poly_example"}, {"N", 1}, {"T", 1.0}, {"p", 0}, {"q", 0}, {"r", 0}, {"Q0", 1.0},
            {"b0", -1.0}, {"c0", 1.0}, {"name", name}};
  if (name == "sect4-example-continuous")
    return {{"family", "poly_example"},
            {"N", 1},
            {"T", 1.0},
            {"p", 1},
            {"q", 2},
            {"r", 1},
            {"Q0", 1.0},
            {"b0", {{"profile", "sinusoid"}, {"offset", -1.0}, {"amplitude", -0.5}, {"omega", 2.0 * M_PI}}},
            {"c0", 0.5},
            {"regime", "continuous"},
            {"name", name}};
  if (name == "sect4-example-measurable")
    return {{"family", "poly_example"},
            {"N", 1},
            {"T", 1.0},
            {"p", 1},
            {"q", 2},
            {"r", 1},
            {"Q0", {{"matrix", 1.0},
                    {"profile", {{"profile", "piecewise_constant"}, {"jumps", {0.5}}, {"values", {1.0, 1.5}}}}}},
            {"b0", {{"profile", "piecewise_constant"}, {"jumps", {0.5}}, {"values", {-1.0, -0.5}}}},
            {"c0", 0.5},
            {"regime", "measurable"},
            {"name", name}};
  if (name == "two-stage-heat")
    return {{"family", "linear_drift"},
            {"N", 1},
            {"T", 2.0},
            {"Q_profile", {{"profile", "piecewise_constant"}, {"jumps", {1.0}}, {"values", {1.0, 2.0}}}},
            {"name", name}};
  throw ConfigError("unknown preset: " + name);
}

ExperimentConfig preset_config(const std::string& name, const std::string& kind) {
  ExperimentConfig c;
  c.preset = name;
  c.op = preset_operator(name);
  c.out = fs::path("runs") / name;
  if (name == "heat-1d" || name == "ou-1d") {
    c.kind = kind.empty() ? "solve" : kind;
    c.h = 1.0 / 128.0;
    c.tau = 1e-3;
    c.radii = {4.0, 8.0, 16.0};
    c.output_times = {0.1, 0.5, 1.0};
    if (c.kind == "smoothing") apply_smoothing_defaults(c, name == "ou-1d" ? 0.2 / 0.15 : 1.0);
    if (c.kind == "schauder") apply_schauder_defaults(c);
    if (c.kind == "smoothing" && name == "ou-1d") c.pairs.resize(2);
  } else if (name == "sect4-example-continuous") {
    c.kind = kind.empty() ? "check-hypotheses" : kind;
    c.radii = {4.0, 8.0, 16.0};
    c.tol = 1e-3;
  } else if (name == "sect4-example-measurable") {
    c.kind = kind.empty() ? "mollify-study" : kind;
    c.radii = {4.0, 8.0};
    c.tol = 1e-3;
    c.tau = 1.0 / 64.0;
  } else if (name == "two-stage-heat") {
    c.kind = kind.empty() ? "mollify-study" : kind;
    c.t_end = 2.0;
    c.datum = {{"kind", "gaussian"}, {"width", 2.0}};
    c.tau = 5e-3;
    c.h = 1.0 / 32.0;
    c.scheme = "crank_nicolson";
    c.oracle = "composed_gaussian";
    c.residual_bound = true;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  require(is_kind(c.kind), "unknown experiment kind: " + c.kind);
  return c;
}

OperatorSpec resolve_operator(const json& ref) {
  try {
    if (ref.is_string()) {
      const std::string s = ref.get<std::string>();
      if (is_preset(s)) return operator_from_json(preset_operator(s));
      std::ifstream in(s);
      if (!in) throw ConfigError("operator reference is neither a preset nor a readable file: " + s);
      return operator_from_json(json::parse(in));
    }
    require(ref.is_object(), "operator must be an object, preset name or file path");
    return operator_from_json(ref);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid operator: ") + e.what());
  }
}

Datum datum_from_json(const json& j) {
  require(j.is_object() && j.contains("kind"), "datum needs a kind");
  const std::string kind = get_as<std::string>(j.at("kind"), "kind");
  const double a = j.value("amplitude", 1.0);
  if (kind == "zero") return [](const Point&) { return 0.0; };
  if (kind == "constant") {
    const double v = j.value("value", 1.0);
    return [v](const Point&) { return v; };
  }
  if (kind == "gaussian") {
    const double w = j.value("width", 1.0);
    require(w > 0.0, "gaussian width must be positive");
    return [a, w](const Point& x) { return a * std::exp(-x.squaredNorm() / (w * w)); };
  }
  if (kind == "tanh") {
    const double sc = j.value("scale", 1.0);
    require(sc > 0.0, "tanh scale must be positive");
    return [a, sc](const Point& x) { return a * std::tanh(x[0] / sc); };
  }
  if (kind == "kink") {
    const double e = j.value("eps", 0.002), w = j.value("width", 1.0);
    require(e > 0.0 && w > 0.0, "kink parameters must be positive");
    return [a, e, w](const Point& x) {
      const double y = std::abs(x[0]) / e;
      // log cosh without overflow
      return a * e * (y + std::log1p(std::exp(-2.0 * y)) - std::log(2.0)) * std::exp(-x[0] * x[0] / (w * w));
    };
  }
  if (kind == "sine") {
    const double k = j.value("k", 1.0), w = j.value("width", 0.0);
    return [a, k, w](const Point& x) {
      const double env = w > 0.0 ? std::exp(-x.squaredNorm() / (w * w)) : 1.0;
      return a * std::sin(k * x[0]) * env;
    };
  }
  throw ConfigError("unknown datum kind: " + kind);
}

Source source_from_json(const json& j) {
  require(j.is_array(), "source must be an array");
  Source g;
  for (const auto& term : j) {
    require(term.is_object() && term.contains("profile") && term.contains("field"),
            "source terms need a profile and a field");
    try {
      g.push_back({TimeProfile::from_json(term.at("profile")), datum_from_json(term.at("field")),
                   term.at("field").dump()});
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("invalid source: ") + e.what());
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Manifest

json RunManifest::to_json() const {
  json stages_j = json::array(), outputs_j = json::array();
  for (const auto& s : stages) stages_j.push_back({{"name", s.name}, {"pass", s.pass}, {"detail", s.detail}});
  for (const auto& o : outputs) outputs_j.push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  return {{"config_hash", config_hash}, {"versions", versions},  {"wall_clock_seconds", wall_clock},
          {"stages", stages_j},         {"outputs", outputs_j}, {"status", pass ? "pass" : "fail"}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.versions = j.at("versions");
  m.wall_clock = j.at("wall_clock_seconds").get<double>();
  for (const auto& s : j.at("stages"))
    m.stages.push_back({s.at("name").get<std::string>(), s.at("pass").get<bool>(), s.at("detail").get<std::string>()});
  for (const auto& o : j.at("outputs"))
    m.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>(),
                         o.at("bytes").get<std::uintmax_t>()});
  m.pass = j.at("status").get<std::string>() == "pass";
  return m;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
  return os.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ChecksumError("missing output " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

// ---------------------------------------------------------------------------
// Runners

namespace {

struct RunContext {
  const ExperimentConfig& c;
  OperatorSpec op;
  fs::path dir;
  std::vector<StageStatus> stages;
  NormOptions norms;

  void stage(std::string name, bool pass, std::string detail) {
    stages.push_back({std::move(name), pass, std::move(detail)});
  }
};

DirichletProblem base_problem(const RunContext& ctx) {
  const auto& c = ctx.c;
  DirichletProblem p;
  p.op = ctx.op;
  p.radius = c.radii.front();
  p.h = c.h;
  p.s = c.s;
  p.t_end = c.t_end;
  p.tau = c.tau;
  p.f = datum_from_json(c.datum);
  p.g = source_from_json(c.source);
  p.output_times = c.output_times;
  return p;
}

ExpandingBallOptions ball_options(const ExperimentConfig& c) {
  ExpandingBallOptions o;
  o.radii = c.radii;
  o.tol = c.tol;
  o.scheme = scheme_from_string(c.scheme);
  return o;
}

void run_check_hypotheses(RunContext& ctx) {
  HypothesisOptions o;
  o.box_radius = ctx.c.box_radius;
  o.space_samples = ctx.c.space_samples;
  o.time_samples = ctx.c.time_samples;
  const HypothesisReport rep = check_hypotheses(ctx.op, o);
  rep.write_csv(ctx.dir / "hypotheses.csv");
  write_text(ctx.dir / "hypotheses.json", rep.to_json().dump(2) + "\n");
  for (const auto& cond : rep.conditions)
    ctx.stage("hypothesis:" + cond.id, cond.verdict == Verdict::Pass, to_string(cond.verdict) + " " + cond.note);
}

void write_frames(const Trajectory& traj, const OperatorSpec& op, double s, double f_sup, const fs::path& path) {
  Csv csv({"t", "sup_abs", "sup_bound_ratio"});
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double sup = traj.frames[k].values().cwiseAbs().maxCoeff();
    const double bound = std::exp(op.c0 * (traj.times[k] - s)) * f_sup;
    csv.row({traj.times[k], sup, bound > 0.0 ? sup / bound : 0.0});
  }
  csv.write(path);
}

void run_solve(RunContext& ctx) {
  const auto& c = ctx.c;
  const DirichletProblem p = base_problem(ctx);
  const ExpandingBallOptions o = ball_options(c);
  ExpandingBallResult res;
  if (p.g.empty()) {
    res = expanding_ball_solve(p, o);
  } else {
    ForcedProblem fp;
    fp.base = p;
    fp.r_eval = c.r_eval;
    res = solve_forced(fp, o);
  }
  Csv ladder({"radius", "difference", "defect"});
  for (std::size_t k = 0; k < res.radii.size(); ++k) {
    const double d = k > 0 && k - 1 < res.differences.size() ? res.differences[k - 1] : 0.0;
    const double m = k > 0 && k - 1 < res.defects.size() ? res.defects[k - 1] : 0.0;
    ladder.row({res.radii[k], d, m});
  }
  ladder.write(ctx.dir / "ladder.csv");
  const double f_sup = res.trajectory.initial().values().cwiseAbs().maxCoeff();
  write_frames(res.trajectory, ctx.op, c.s, f_sup, ctx.dir / "frames.csv");
  res.trajectory.final().write_csv(ctx.dir / "final.csv");

  ctx.stage("expanding_ball", res.converged, "achieved tol " + fmt(res.achieved_tol));
  if (p.g.empty()) {
    const double ratio = verify_sup_bound(res.trajectory, ctx.op);
    const double allowed = 1.0 + 10.0 * (c.h * c.h + c.tau);
    ctx.stage("sup_bound", ratio <= allowed, "max ratio " + fmt(ratio) + " allowed " + fmt(allowed));
  }
  if (res.nonnegative_datum && res.defects.size() >= 1) {
    bool ok = true;
    for (const double d : res.defects) ok = ok && d <= 10.0 * c.h * c.h;
    for (std::size_t k = 1; k < res.differences.size(); ++k) ok = ok && res.differences[k] < res.differences[k - 1];
    ctx.stage("monotone_convergence", ok, "defects and differences along the radius ladder");
  }
}

void run_smoothing(RunContext& ctx) {
  const auto& c = ctx.c;
  std::vector<SmoothingPair> pairs = c.pairs;
  if (pairs.empty()) pairs.push_back({0.0, 1.0, 0.15, json()});
  Csv table({"alpha", "beta", "t_minus_s", "norm", "fitted_exponent", "fitted_C", "residual"});
  Csv fits({"alpha", "beta", "predicted", "exponent", "constant", "residual", "top_exponent", "resolution_gap"});
  for (const auto& pr : pairs) {
    SmoothingOptions o;
    o.alpha = pr.alpha;
    o.beta = pr.beta;
    o.ladder = c.ladder;
    o.r_eval = c.r_eval;
    o.h = c.h;
    o.tau = c.tau;
    o.ball = ball_options(c);
    o.norms = ctx.norms;
    const std::string name = "smoothing(" + fmt(pr.alpha) + "," + fmt(pr.beta) + ")";
    try {
      const SmoothingFit f = measure_smoothing(ctx.op, datum_from_json(pr.datum.is_null() ? c.datum : pr.datum), c.s, o);
      for (std::size_t k = 0; k < f.elapsed.size(); ++k)
        table.row({f.alpha, f.beta, f.elapsed[k], f.norms[k], f.exponent, f.constant, f.residual});
      fits.row({f.alpha, f.beta, f.predicted, f.exponent, f.constant, f.residual, f.top_exponent, f.resolution_gap});
      const double dev = std::abs(f.exponent - f.predicted);
      ctx.stage(name, dev <= pr.tol,
                "exponent " + fmt(f.exponent) + " predicted " + fmt(f.predicted) + " tol " + fmt(pr.tol));
    } catch (const UnderResolvedError& e) {
      ctx.stage(name, false, e.what());
    }
  }
  table.write(ctx.dir / "smoothing.csv");
  fits.write(ctx.dir / "fits.csv");

  if (c.bernstein) {
    BernsteinOptions b;
    b.n = c.bernstein_n;
    b.s = c.s;
    b.t_end = ctx.op.horizon();
    const BernsteinMonitor m = bernstein_monitor(ctx.op, datum_from_json(c.bernstein_datum), b);
    Csv csv({"t", "sup_v", "bound", "ratio"});
    for (const auto& fr : m.frames) csv.row({fr.t, fr.sup_v, fr.bound, fr.ratio});
    csv.write(ctx.dir / "bernstein.csv");
    std::string detail = "a " + fmt(m.a) + " c1 " + fmt(m.c1) + " max ratio " + fmt(m.max_ratio);
    if (m.derivative_noise) detail += " (third derivatives noisy on this mesh)";
    ctx.stage("bernstein", m.max_ratio <= 1.05, detail);
  }
}

double ball_difference(const GridFunction& a, const GridFunction& b, double r_eval) {
  const double r = std::min(a.radius(), b.radius());
  const GridFunction d = b.restrict_to(r) - a.restrict_to(r);
  return sup_norm(d, std::min(r_eval, r));
}

void run_schauder(RunContext& ctx) {
  const auto& c = ctx.c;
  ForcedProblem p;
  p.base = base_problem(ctx);
  if (p.base.output_times.empty())
    for (int k = 1; k <= 4; ++k) p.base.output_times.push_back(c.s + (c.t_end - c.s) * k / 4.0);
  p.theta = c.theta;
  p.r_eval = c.r_eval;
  record_data_norms(p, ctx.norms);
  const ExpandingBallOptions o = ball_options(c);

  Csv table({"h", "tau", "ratio", "sup_norm_u", "norm_f", "norm_g"});
  std::vector<double> ratios;
  Trajectory direct;
  for (int level = 0; level < 2; ++level) {
    ForcedProblem q = p;
    q.base.h = c.h * std::ldexp(1.0, -level);
    q.base.tau = c.tau * std::pow(0.25, level);
    const Trajectory traj = solve_forced(q, o).trajectory;
    const SchauderRatio r = schauder_ratio(q, traj, ctx.norms);
    table.row({q.base.h, q.base.tau, r.ratio, r.sup_norm_u, r.norm_f, r.norm_g});
    ratios.push_back(r.ratio);
    if (level == 0) direct = traj;
  }
  table.write(ctx.dir / "schauder.csv");
  const double change = std::abs(ratios[1] - ratios[0]) / std::max(ratios[0], 1e-300);
  ctx.stage("schauder_refinement", std::isfinite(ratios[0]) && change <= c.refinement_tol,
            "ratio " + fmt(ratios[0]) + " -> " + fmt(ratios[1]) + " relative change " + fmt(change));

  if (!p.base.g.empty()) {
    VocOptions vo;
    vo.scheme = scheme_from_string(c.scheme);
    const VocResult v = voc_solution(p, vo);
    const double bound = 10.0 * (c.tau + c.h * c.h + v.quad_step * v.quad_step);
    Csv csv({"t", "difference", "bound"});
    double worst = 0.0;
    for (const double t : p.base.output_times) {
      const double d = ball_difference(v.trajectory.at(t), direct.at(t), c.r_eval);
      worst = std::max(worst, d);
      csv.row({t, d, bound});
    }
    csv.write(ctx.dir / "voc.csv");
    ctx.stage("voc_consistency", worst <= bound, "max difference " + fmt(worst) + " bound " + fmt(bound));
  }
}

// Pure-diffusion operator with scalar Q(t) and Gaussian datum A exp(-|x|^2/w^2):
// u(t) = A (w^2/(w^2 + 4 theta))^{N/2} exp(-|x|^2/(w^2 + 4 theta)), theta = int Q.
double composed_gaussian(const json& datum, int dim, double theta, const Point& x) {
  const double a = datum.value("amplitude", 1.0), w = datum.value("width", 1.0);
  const double v = w * w + 4.0 * theta;
  return a * std::pow(w * w / v, 0.5 * dim) * std::exp(-x.squaredNorm() / v);
}

double integrate_q(const OperatorSpec& op, double s, double t) {
  const int m = 4000;
  const Point x0 = Point::Zero(op.dim());
  double acc = 0.0;
  for (int k = 0; k <= m; ++k) {
    const double w = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * op.evaluate(s + (t - s) * k / m, x0, 0).diffusion()(0, 0);
  }
  return acc * (t - s) / (3.0 * m);
}

void run_mollify_study(RunContext& ctx) {
  const auto& c = ctx.c;
  const DirichletProblem p = base_problem(ctx);
  DiscontinuousOptions o;
  o.n_ladder = c.n_ladder;
  o.tol = c.mollify_tol;
  o.r_eval = c.r_eval;
  o.scheme = scheme_from_string(c.scheme);
  o.ball = ball_options(c);
  const DiscontinuousResult res = solve_discontinuous(p, o);

  Csv csv({"n", "increment_sup", "increment_grad", "increment_hess", "residual"});
  for (const auto& r : res.rows) csv.row({r.n, r.increment_sup, r.increment_grad, r.increment_hess, r.residual});
  csv.write(ctx.dir / "convergence.csv");
  res.trajectory.final().write_csv(ctx.dir / "final.csv");

  bool monotone = true;
  for (std::size_t k = 2; k < res.rows.size(); ++k)
    monotone = monotone && res.rows[k].increment_sup < res.rows[k - 1].increment_sup;
  ctx.stage("increments_monotone", monotone,
            "last increment " + fmt(res.rows.back().increment_sup) + (res.converged ? " within " : " above ") +
                "tol " + fmt(c.mollify_tol));
  bool falling = true;
  for (std::size_t k = 1; k < res.rows.size(); ++k) falling = falling && res.rows[k].residual < res.rows[k - 1].residual;
  ctx.stage("residual_decreasing", falling, "last residual " + fmt(res.rows.back().residual));
  if (c.residual_bound) {
    const double allowed = 10.0 * (c.tau + c.h * c.h);
    ctx.stage("residual_bound", res.rows.back().residual <= allowed,
              "residual " + fmt(res.rows.back().residual) + " allowed " + fmt(allowed));
  }

  if (c.oracle == "composed_gaussian") {
    const json& src = ctx.op.source;
    const bool pure = src.value("family", "") == "linear_drift" && !src.contains("B") && !src.contains("v") &&
                      !src.contains("c");
    require(pure && c.datum.value("kind", "") == "gaussian" && c.source.empty(),
            "composed_gaussian oracle needs a pure-diffusion linear_drift operator, a gaussian datum and no source");
    // The mollified diffusion has lost kernel mass near the ends of [0, T], so
    // compare against its own integral and report the n -> infinity limit beside it.
    const MollifiedOperator m(ctx.op, c.n_ladder.back());
    const double theta_n = integrate_q(m.op(), c.s, c.t_end);
    const double theta = integrate_q(ctx.op, c.s, c.t_end);
    const GridFunction& u = res.trajectory.final();
    double err = 0.0, err_limit = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      const Point x = u.point(k);
      if (x.norm() > c.r_eval) continue;
      err = std::max(err, std::abs(u[k] - composed_gaussian(c.datum, ctx.op.dim(), theta_n, x)));
      err_limit = std::max(err_limit, std::abs(u[k] - composed_gaussian(c.datum, ctx.op.dim(), theta, x)));
    }
    Csv oc({"n", "theta_effective", "error", "theta_limit", "error_limit"});
    oc.row({c.n_ladder.back(), theta_n, err, theta, err_limit});
    oc.write(ctx.dir / "oracle.csv");
    ctx.stage("oracle", err <= kOracleTol,
              "error " + fmt(err) + " (limit oracle " + fmt(err_limit) + ") tol " + fmt(kOracleTol));
  }
}

void prepare_run_dir(const fs::path& dir) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ConfigError("output path is not a directory: " + dir.string());
    if (!fs::is_empty(dir)) {
      if (!fs::exists(dir / kRunMarker))
        throw ConfigError("refusing to clear " + dir.string() + ": it does not hold an earlier run");
      for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
    }
  }
  fs::create_directories(dir);
  write_text(dir / kRunMarker, "schauder-lab run directory\n");
}

std::vector<OutputFile> collect_outputs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name == kRunMarker || name == kManifestName || name == std::string(kManifestName) + ".tmp") continue;
    files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::vector<OutputFile> out;
  for (const auto& f : files) out.push_back({f.generic_string(), sha256_file(dir / f), fs::file_size(dir / f)});
  return out;
}

}  // namespace

RunManifest run(const ExperimentConfig& c) {
  validate(c);
  const auto start = std::chrono::steady_clock::now();
  RunContext ctx{c, resolve_operator(c.op), c.out, {}, {}};
  ctx.norms.seed = c.seed;
  // Resolve data specs before the directory is touched so config errors leave it alone.
  (void)datum_from_json(c.datum);
  (void)source_from_json(c.source);
  for (const auto& p : c.pairs)
    if (!p.datum.is_null()) (void)datum_from_json(p.datum);

  prepare_run_dir(c.out);
  write_text(c.out / "config.json", strip_out(c).dump(2) + "\n");

  Csv diagnostics({"stage", "message"});
  bool failed_hard = false;
  try {
    if (c.kind == "check-hypotheses") run_check_hypotheses(ctx);
    else if (c.kind == "solve") run_solve(ctx);
    else if (c.kind == "smoothing") run_smoothing(ctx);
    else if (c.kind == "schauder") run_schauder(ctx);
    else run_mollify_study(ctx);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    ctx.stage(c.kind, false, e.what());
    failed_hard = true;
  }
  for (const auto& s : ctx.stages)
    if (!s.pass) diagnostics.row(std::vector<std::string>{s.name, "\"" + s.detail + "\""});
  if (failed_hard || std::any_of(ctx.stages.begin(), ctx.stages.end(), [](const auto& s) { return !s.pass; }))
    diagnostics.write(c.out / "diagnostics.csv");

  RunManifest m;
  m.config_hash = sha256_hex(strip_out(c).dump());
  m.versions = {{"schauder_lab", kVersion}, {"manifest_format", 1}};
  m.stages = ctx.stages;
  m.pass = std::all_of(m.stages.begin(), m.stages.end(), [](const auto& s) { return s.pass; });
  m.outputs = collect_outputs(c.out);
  m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fs::path tmp = c.out / (std::string(kManifestName) + ".tmp");
  write_text(tmp, m.to_json().dump(2) + "\n");
  fs::rename(tmp, c.out / kManifestName);
  return m;
}

// ---------------------------------------------------------------------------
// Report

namespace {

struct Series {
  std::vector<double> x, y;
  std::string label;
  bool line = false;
};

std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<Series>& series, bool loglog) {
  const double width = 640, height = 420, left = 70, right = 20, top = 40, bottom = 50;
  auto tx = [&](double v) { return loglog ? std::log10(v) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (loglog && (s.x[k] <= 0.0 || s.y[k] <= 0.0)) continue;
      x0 = std::min(x0, tx(s.x[k]));
      x1 = std::max(x1, tx(s.x[k]));
      y0 = std::min(y0, tx(s.y[k]));
      y1 = std::max(y1, tx(s.y[k]));
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * (width - left - right); };
  auto py = [&](double v) { return height - bottom - (tx(v) - y0) / (y1 - y0) * (height - top - bottom); };
  const std::array<const char*, 4> colors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
     << height - bottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << xlabel << (loglog ? " (log10)" : "") << "</text>\n";
  os << "<text x=\"16\" y=\"" << height / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 " << height / 2
     << ")\" text-anchor=\"middle\">" << ylabel << (loglog ? " (log10)" : "") << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    const double xp = left + (width - left - right) * k / 4.0, yp = height - bottom - (height - top - bottom) * k / 4.0;
    os << "<text x=\"" << xp << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
       << xv << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << yp + 3 << "\" text-anchor=\"end\" font-size=\"10\">" << yv
       << "</text>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* col = colors[si % colors.size()];
    if (s.line) {
      os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < s.x.size(); ++k)
        if (!loglog || (s.x[k] > 0.0 && s.y[k] > 0.0)) os << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
      os << "\"/>\n";
    } else {
      for (std::size_t k = 0; k < s.x.size(); ++k)
        if (!loglog || (s.x[k] > 0.0 && s.y[k] > 0.0))
          os << "<circle cx=\"" << px(s.x[k]) << "\" cy=\"" << py(s.y[k]) << "\" r=\"3.5\" fill=\"" << col << "\"/>\n";
    }
    os << "<text x=\"" << width - right - 8 << "\" y=\"" << top + 14 * (si + 1) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
       << col << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::vector<fs::path> report(const fs::path& run_dir) {
  const fs::path mpath = run_dir / kManifestName;
  if (!fs::exists(mpath)) throw ChecksumError("no manifest in " + run_dir.string() + " (incomplete or empty run)");
  RunManifest m;
  try {
    std::ifstream in(mpath);
    m = RunManifest::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ChecksumError(std::string("corrupt manifest: ") + e.what());
  }
  for (const auto& o : m.outputs) {
    const std::string sum = sha256_file(run_dir / o.path);
    if (sum != o.sha256) throw ChecksumError("checksum mismatch for " + o.path);
  }
  std::set<std::string> listed;
  for (const auto& o : m.outputs) listed.insert(o.path);

  std::vector<fs::path> written;
  std::ostringstream summary;
  json config;
  if (listed.count("config.json")) {
    std::ifstream in(run_dir / "config.json");
    config = json::parse(in);
  }
  summary << "schauder-lab run " << run_dir.string() << "\n";
  summary << "kind: " << config.value("kind", std::string("?")) << "\n";
  if (config.contains("preset") && !config["preset"].get<std::string>().empty())
    summary << "preset: " << config["preset"].get<std::string>() << "\n";
  summary << "config hash: " << m.config_hash << "\n";
  summary << "status: " << (m.pass ? "PASS" : "FAIL") << "\n";
  summary << "wall clock: " << fmt(m.wall_clock) << " s\n\nstages:\n";
  for (const auto& s : m.stages) summary << "  [" << (s.pass ? "pass" : "FAIL") << "] " << s.name << ": " << s.detail << "\n";

  if (listed.count("smoothing.csv")) {
    const Table t = read_table(run_dir / "smoothing.csv");
    std::map<std::pair<double, double>, Series> points;
    std::map<std::pair<double, double>, std::pair<double, double>> fit;
    for (const auto& r : t.rows) {
      const std::pair<double, double> key{r[t.col("alpha")], r[t.col("beta")]};
      points[key].x.push_back(r[t.col("t_minus_s")]);
      points[key].y.push_back(r[t.col("norm")]);
      fit[key] = {r[t.col("fitted_exponent")], r[t.col("fitted_C")]};
    }
    summary << "\nsmoothing fits:\n";
    for (auto& [key, pts] : points) {
      const auto [e, cc] = fit[key];
      pts.label = "measured";
      Series line;
      line.line = true;
      line.label = "fit C t^-" + fmt(e);
      for (const double x : pts.x) {
        line.x.push_back(x);
        line.y.push_back(cc * std::pow(x, -e));
      }
      const std::string name = "smoothing_a" + fmt(key.first) + "_b" + fmt(key.second) + ".svg";
      write_text(run_dir / name,
                 svg_plot("C^" + fmt(key.second) + " norm from C^" + fmt(key.first) + " data", "t - s",
                          "norm", {pts, line}, true));
      written.push_back(run_dir / name);
      summary << "  (" << fmt(key.first) << ", " << fmt(key.second) << "): exponent " << fmt(e) << ", predicted "
              << fmt(0.5 * (key.second - key.first)) << "\n";
    }
  }
  if (listed.count("convergence.csv")) {
    const Table t = read_table(run_dir / "convergence.csv");
    Series inc;
    inc.label = "sup increment";
    Series grad;
    grad.label = "gradient increment";
    for (const auto& r : t.rows) {
      if (r[t.col("increment_sup")] <= 0.0) continue;
      inc.x.push_back(r[t.col("n")]);
      inc.y.push_back(r[t.col("increment_sup")]);
      grad.x.push_back(r[t.col("n")]);
      grad.y.push_back(r[t.col("increment_grad")]);
    }
    inc.line = grad.line = true;
    write_text(run_dir / "mollify_increments.svg",
               svg_plot("Cauchy increments along the mollification ladder", "n", "increment", {inc, grad}, true));
    written.push_back(run_dir / "mollify_increments.svg");
    summary << "\nmollification increments:";
    for (std::size_t k = 0; k < inc.x.size(); ++k) summary << " n=" << fmt(inc.x[k]) << ":" << fmt(inc.y[k]);
    summary << "\n";
  }
  if (listed.count("bernstein.csv")) {
    const Table t = read_table(run_dir / "bernstein.csv");
    Series ratio;
    ratio.label = "sup v / bound";
    ratio.line = true;
    for (const auto& r : t.rows) {
      ratio.x.push_back(r[t.col("t")]);
      ratio.y.push_back(r[t.col("ratio")]);
    }
    write_text(run_dir / "bernstein.svg", svg_plot("Bernstein functional against its bound", "t", "ratio", {ratio}, false));
    written.push_back(run_dir / "bernstein.svg");
  }
  write_text(run_dir / "summary.txt", summary.str());
  written.push_back(run_dir / "summary.txt");
  return written;
}

}  // namespace schauder
