#include "schauder/experiment.hpp"
#include "schauder/parallel.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

using namespace schauder;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::string preset;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> h, tau, t_end, theta;
  std::optional<std::string> scheme;
  bool print_config = false;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)");
  cmd->add_option("--preset", o.preset, "start from a bundled preset")
      ->check(CLI::IsMember(kPresets));
  cmd->add_option("--out", o.out, "run directory");
  cmd->add_option("--seed", o.seed, "seed for sampled quantities");
  cmd->add_option("--threads", o.threads, "worker threads (overrides SCHAUDER_LAB_THREADS)")->check(CLI::PositiveNumber);
  cmd->add_option("--mesh-width", o.h, "mesh width h");
  cmd->add_option("--tau", o.tau, "time step");
  cmd->add_option("--t-end", o.t_end, "final time");
  cmd->add_option("--theta", o.theta, "Hoelder exponent of the Schauder study");
  cmd->add_option("--scheme", o.scheme, "backward_euler or crank_nicolson");
  cmd->add_flag("--print-config", o.print_config, "print the resolved config and exit");
}

int run_kind(const std::string& kind, const Overrides& o) {
  json j = json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("cannot open config " + o.config);
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + o.config + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
  }
  if (!o.preset.empty()) j["preset"] = o.preset;
  if (j.contains("kind") && j["kind"] != kind)
    throw ConfigError("config kind '" + j["kind"].get<std::string>() + "' does not match command '" + kind + "'");
  j["kind"] = kind;
  if (o.out) j["out"] = *o.out;
  if (o.seed) j["seed"] = *o.seed;
  if (o.h) j["h"] = *o.h;
  if (o.tau) j["tau"] = *o.tau;
  if (o.t_end) j["t_end"] = *o.t_end;
  if (o.theta) j["theta"] = *o.theta;
  if (o.scheme) j["scheme"] = *o.scheme;
  if (!j.contains("preset") && !j.contains("operator"))
    throw ConfigError("give --config with an operator or --preset");
  const ExperimentConfig c = config_from_json(j);
  if (o.print_config) {
    json out = config_to_json(c);
    std::cout << out.dump(2) << '\n';
    return 0;
  }
  if (o.threads) set_thread_count(*o.threads);

  const RunManifest m = run(c);
  for (const auto& s : m.stages)
    std::cout << (s.pass ? "pass  " : "FAIL  ") << s.name << "  " << s.detail << '\n';
  std::cout << (m.pass ? "run passed" : "run failed") << " -> " << c.out.string() << '\n';
  return m.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for nonautonomous parabolic problems with unbounded coefficients"};
  app.require_subcommand(1);
  Overrides o;
  std::string kind;
  for (const auto& k : kExperimentKinds) {
    CLI::App* cmd = app.add_subcommand(k, "run a " + k + " experiment");
    add_run_options(cmd, o);
    cmd->callback([&kind, k] { kind = k; });
  }
  std::string run_dir;
  CLI::App* rep = app.add_subcommand("report", "verify a run directory and render plots and a summary");
  rep->add_option("run_dir", run_dir, "run directory")->required();
  app.add_subcommand("presets", "list bundled presets")->callback([] {
    for (const auto& p : kPresets) std::cout << p << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (rep->parsed()) {
      for (const auto& f : report(run_dir)) std::cout << f.string() << '\n';
      return 0;
    }
    if (kind.empty()) return 0;
    return run_kind(kind, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ChecksumError& e) {
    std::cerr << "report error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
