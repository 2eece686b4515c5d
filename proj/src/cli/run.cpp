#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "ftle/cli/commands.hpp"
#include "ftle/error.hpp"

namespace ftle::cli {

namespace {

// Section that the model and run-size flags address for each subcommand.
struct FlagTargets {
  std::string n, mu, sigma2, tau, paths, dt, t_final;
};

FlagTargets targets_for(const std::string& sub) {
  if (sub == "phase-scan") return {"phase.n", "", "", "phase.tau", "phase.paths", "phase.dt", "phase.t"};
  if (sub == "field-check") {
    return {"field.n", "field.mu", "field.sigma2", "field.tau", "field.paths", "field.dt", "field.t_final"};
  }
  if (sub == "autocorr") {
    return {"field.n", "field.mu", "field.sigma2", "field.tau", "", "autocorr.dt", "autocorr.horizon"};
  }
  if (sub == "reproduce-fig1") return {"fig1.n", "fig1.mu", "fig1.sigma2", "fig1.tau", "fig1.paths", "", ""};
  return {"ensemble.n", "ensemble.mu", "ensemble.sigma2", "ensemble.tau",
          "paths.count", "integrator.dt", "integrator.t_final"};
}

void print_line(const Json& j) { std::cout << j.dump() << std::endl; }

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Finite-time Lyapunov exponent experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<std::string> n, mu, sigma2, tau, mu_hat, paths, dt, t_final;

  static const std::map<std::string, std::string> kAbout = {
      {"validate", "Check parameters and report the Lyapunov spectrum"},
      {"simulate-matrix", "Exponent paths from the matrix flow"},
      {"simulate-gdbm", "Exponent paths from the particle system"},
      {"simulate-dyson", "Paths of the weak-noise Dyson process"},
      {"compare-routes", "KS comparison of matrix and particle routes"},
      {"phase-scan", "Top exponent over a (tau, mu_hat) grid"},
      {"field-check", "Tangent flow of a synthesized field against gdbm"},
      {"autocorr", "Lagrangian autocorrelation time along a trajectory"},
      {"reproduce-fig1", "Short and long exponent paths with asymptotes"},
  };
  for (const auto& name : subcommand_names()) {
    const auto about = kAbout.find(name);
    CLI::App* sub = app.add_subcommand(name, about == kAbout.end() ? std::string() : about->second);
    sub->add_option("--config", config_path, "TOML experiment config");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--threads", threads, "Worker cap; results do not depend on it");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--set", sets, "Override any config key: section.key=value");
    sub->add_option("--n", n, "Dimension");
    sub->add_option("--sigma2", sigma2, "Jacobian noise scale");
    sub->add_option("--tau", tau, "Interpolation parameter (phase-scan: grid)");
    if (name != "phase-scan") sub->add_option("--mu", mu, "Relaxation rate");
    if (name == "phase-scan") sub->add_option("--mu-hat", mu_hat, "Rescaled rate grid, e.g. 0.3:0.7:0.05");
    sub->add_option("--paths", paths, "Number of trajectories");
    sub->add_option("--dt", dt, "Time step");
    sub->add_option("--t-final", t_final, "Final time (autocorr: horizon)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorCode::ConfigError, "--set expects key=value, got '" + s + "'");
      }
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    // Named flags win over --set.
    if (seed) overrides.emplace_back("seed", std::to_string(*seed));
    if (threads) overrides.emplace_back("threads", std::to_string(*threads));
    if (out) overrides.emplace_back("out", Json(*out).dump());
    const FlagTargets t = targets_for(sub);
    auto route = [&](const std::optional<std::string>& v, const std::string& key, const char* flag) {
      if (!v) return;
      if (key.empty()) throw Error(ErrorCode::ConfigError, std::string(flag) + " does not apply to " + sub);
      overrides.emplace_back(key, *v);
    };
    route(n, t.n, "--n");
    route(mu, t.mu, "--mu");
    route(sigma2, t.sigma2, "--sigma2");
    route(tau, t.tau, "--tau");
    route(mu_hat, "phase.mu_hat", "--mu-hat");
    route(paths, t.paths, "--paths");
    route(dt, t.dt, "--dt");
    route(t_final, t.t_final, "--t-final");

    const ExperimentConfig cfg = ExperimentConfig::resolve(config_path, overrides);
    const CommandResult r = run_command(sub, cfg);
    print_line({{"status", "ok"},
                {"subcommand", sub},
                {"config_hash", cfg.hash()},
                {"seed", cfg.json()["seed"]},
                {"outputs", r.outputs},
                {"summary", r.summary}});
    return 0;
  } catch (const Error& e) {
    print_line({{"status", "error"}, {"subcommand", sub}, {"error", to_string(e.code())}, {"message", e.what()}});
    std::cerr << e.what() << '\n';
    return is_numerical(e.code()) ? 3 : 2;
  } catch (const Json::exception& e) {
    print_line({{"status", "error"}, {"subcommand", sub}, {"error", "ConfigError"}, {"message", e.what()}});
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    print_line({{"status", "error"}, {"subcommand", sub}, {"error", "Internal"}, {"message", e.what()}});
    std::cerr << e.what() << '\n';
    return 1;
  }
}

}  // namespace ftle::cli
