#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "l96cal/harness.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string profile = "paper";
  std::vector<std::string> sets;
  std::string manifest;
  std::string fault;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config, "Settings file (key = value lines)");
  sub->add_option("--seed", o.seed, "Master seed");
  sub->add_option("--out", o.out, "Output directory")->capture_default_str();
  sub->add_option("--profile", o.profile, "paper or smoke")
      ->check(CLI::IsMember({"paper", "smoke"}))
      ->capture_default_str();
  sub->add_option("--set", o.sets, "Override a setting, key=value (repeatable)");
  sub->add_option("--manifest", o.manifest, "Re-run from a manifest.json");
  sub->add_option("--inject-fault", o.fault)->group("");
  sub->add_flag("-q,--quiet", o.quiet, "Suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-scale Lorenz-96 calibration experiments"};
  app.set_version_flag("--version", l96cal::kVersion);
  app.require_subcommand(1);

  CommonOptions opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "Integrate the system at the true parameters and report running statistics"},
      {"scan", "Evaluate the potential along a one-parameter grid"},
      {"eki", "Run ensemble Kalman inversion over noise levels and ensemble sizes"},
      {"mcmc", "Sample the posterior of (F, h, c, b) with random-walk Metropolis"},
      {"fast", "Calibrate the fast subsystem with the slow variable held fixed"},
      {"validate", "Run the property and oracle suite"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : l96cal::kExitConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  std::ostream* log = opts.quiet ? nullptr : &std::cerr;
  l96cal::RunContext ctx;
  try {
    if (!opts.manifest.empty()) {
      ctx = l96cal::context_from_manifest(opts.manifest, opts.out);
      if (ctx.command != command) {
        throw l96cal::ConfigError("manifest was written by '" + ctx.command + "', not '" +
                                  command + "'");
      }
    } else {
      std::vector<std::pair<std::string, std::string>> overrides;
      for (const auto& s : opts.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw l96cal::ConfigError("--set expects key=value: " + s);
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      std::optional<std::string> config;
      if (!opts.config.empty()) config = opts.config;
      ctx = l96cal::make_context(command, l96cal::profile_from_name(opts.profile), config,
                                 overrides, opts.seed, opts.out);
    }
    if (!opts.fault.empty()) {
      if (opts.fault != "tendency-sign") throw l96cal::ConfigError("unknown fault " + opts.fault);
      ctx.inject_tendency_fault = true;
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return l96cal::kExitConfigError;
  }
  ctx.log = log;
  return l96cal::run_command(ctx);
}
