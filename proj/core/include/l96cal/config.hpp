#pragma once

/// Experiment configuration: dotted `section.key = value` settings with
/// paper and smoke profiles, file loading and command-line overrides.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "l96cal/dynamics.hpp"
#include "l96cal/eki.hpp"
#include "l96cal/mcmc.hpp"

namespace l96cal {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Profile { paper, smoke };
Profile profile_from_name(const std::string& name);
std::string profile_name(Profile p);

/// Ordered key -> raw string settings. Every key must be known.
class Settings {
 public:
  static Settings defaults(Profile profile);

  /// Throws ConfigError for unknown keys.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Parse `key = value` lines; `#` starts a comment.
  void load(std::istream& is, const std::string& origin = "<stream>");
  void load_file(const std::string& path);
  void write(std::ostream& os) const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
  Profile profile = Profile::paper;
  std::uint64_t seed = 20170101;

  SystemShape shape;
  Params truth;
  IntegratorConfig integrator;

  double control_duration = 46416.0;
  double control_spinup = 20.0;
  bool pooled_variances = false;

  double window = 100.0;
  double window_fast = 20.0;
  double window_scan = 1e4;

  std::vector<double> noise_levels{0.1, 0.2, 0.5, 1.0};
  double noise_r = 0.5;
  double noise_r_fast = 0.5;

  std::vector<int> ensemble_sizes{10, 100};
  EKIConfig eki;

  MCMCConfig mcmc;
  int bins = 30;
  std::string warm_start = "eki";
  int warm_start_ensemble = 100;
  int warm_start_iter = 25;

  double x_fixed = 2.556;
  double fast_control_duration = 46416.0;

  std::string scan_param = "F";
  std::vector<double> scan_grid;

  double simulate_duration = 1e4;
  double simulate_sample_interval = 1.0;

  double validate_identity_days = 1e4;
  long long validate_mcmc_steps = 100000;
  int validate_eki_members = 10000;

  /// Build from settings; throws ConfigError on malformed values.
  static ExperimentConfig from_settings(const Settings& s);
};

std::vector<double> parse_real_list(const std::string& text);
/// `lo:hi:n` for an inclusive uniform grid, or a comma-separated list.
std::vector<double> parse_grid(const std::string& text);

}  // namespace l96cal
