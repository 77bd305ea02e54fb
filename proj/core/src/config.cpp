#include "l96cal/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "l96cal/csv.hpp"

namespace l96cal {

namespace {

using Table = std::vector<std::pair<std::string, std::pair<std::string, std::string>>>;

// key, (paper default, smoke default)
const Table& default_table() {
  static const Table table = {
      {"seed", {"20170101", "20170101"}},
      {"system.K", {"36", "8"}},
      {"system.J", {"10", "4"}},
      {"truth.F", {"10", "10"}},
      {"truth.h", {"1", "1"}},
      {"truth.c", {"10", "10"}},
      {"truth.b", {"10", "10"}},
      {"integrator.dt", {"0.001", "0.001"}},
      {"control.duration", {"46416", "500"}},
      {"control.spinup", {"20", "20"}},
      {"control.pooled_variances", {"false", "false"}},
      {"window.T", {"100", "10"}},
      {"window.T_fast", {"20", "10"}},
      {"window.scan", {"10000", "100"}},
      {"noise.levels", {"0.1,0.2,0.5,1.0", "0.5,1.0"}},
      {"noise.r", {"0.5", "0.5"}},
      {"noise.r_fast", {"0.5", "0.5"}},
      {"eki.ensemble_sizes", {"10,100", "10"}},
      {"eki.max_iter", {"25", "5"}},
      {"eki.perturb", {"true", "true"}},
      {"eki.init_policy", {"shared", "shared"}},
      {"eki.collapse_tol", {"1e-10", "1e-10"}},
      {"eki.threads", {"0", "0"}},
      {"mcmc.n_iter", {"2200", "200"}},
      {"mcmc.burn_in", {"200", "20"}},
      {"mcmc.stride", {"2", "2"}},
      {"mcmc.scale_factor", {"0.02", "0.02"}},
      {"mcmc.adapt", {"false", "false"}},
      {"mcmc.bins", {"30", "30"}},
      {"mcmc.warm_start", {"eki", "eki"}},
      {"mcmc.warm_start_ensemble", {"100", "10"}},
      {"mcmc.warm_start_iter", {"25", "5"}},
      {"fast.x_fixed", {"2.556", "2.556"}},
      {"fast.control_duration", {"46416", "500"}},
      {"scan.param", {"F", "F"}},
      {"scan.grid", {"7:13:25", "9:11:5"}},
      {"simulate.duration", {"10000", "100"}},
      {"simulate.sample_interval", {"1", "1"}},
      {"validate.identity_days", {"10000", "2000"}},
      {"validate.mcmc_steps", {"100000", "100000"}},
      {"validate.eki_members", {"10000", "10000"}},
  };
  return table;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double to_real(const Settings& s, const std::string& key) {
  try {
    return parse_double(s.get(key));
  } catch (const std::invalid_argument&) {
    throw ConfigError("config: '" + key + "' is not a number: '" + s.get(key) + "'");
  }
}

long long to_int(const Settings& s, const std::string& key) {
  const std::string& v = s.get(key);
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' is not an integer: '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const Settings& s, const std::string& key) {
  const std::string& v = s.get(key);
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' is not an unsigned integer: '" + v + "'");
  }
  return out;
}

bool to_bool(const Settings& s, const std::string& key) {
  const std::string& v = s.get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' is not a boolean: '" + v + "'");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

}  // namespace

Profile profile_from_name(const std::string& name) {
  if (name == "paper") return Profile::paper;
  if (name == "smoke") return Profile::smoke;
  throw ConfigError("unknown profile '" + name + "' (expected paper|smoke)");
}

std::string profile_name(Profile p) { return p == Profile::paper ? "paper" : "smoke"; }

const std::vector<std::string>& Settings::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, _] : default_table()) k.push_back(key);
    return k;
  }();
  return keys;
}

Settings Settings::defaults(Profile profile) {
  Settings s;
  for (const auto& [key, vals] : default_table()) {
    s.values_[key] = profile == Profile::paper ? vals.first : vals.second;
  }
  return s;
}

void Settings::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    throw ConfigError("config: unknown key '" + key + "'");
  }
  values_[key] = trim(value);
}

const std::string& Settings::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'");
  return it->second;
}

void Settings::load(std::istream& is, const std::string& origin) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void Settings::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  load(in, path);
}

void Settings::write(std::ostream& os) const {
  for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(parse_double(item));
    } catch (const std::invalid_argument&) {
      throw ConfigError("config: bad list entry '" + item + "'");
    }
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  if (text.find(':') == std::string::npos) return parse_real_list(text);
  std::stringstream ss(text);
  std::string lo_s, hi_s, n_s;
  if (!std::getline(ss, lo_s, ':') || !std::getline(ss, hi_s, ':') || !std::getline(ss, n_s)) {
    throw ConfigError("config: grid must be 'lo:hi:n'");
  }
  double lo = 0, hi = 0;
  long long n = 0;
  try {
    lo = parse_double(trim(lo_s));
    hi = parse_double(trim(hi_s));
    n = std::stoll(trim(n_s));
  } catch (const std::exception&) {
    throw ConfigError("config: grid must be 'lo:hi:n'");
  }
  require(n >= 1, "grid needs n >= 1");
  if (n == 1) return {lo};
  std::vector<double> g(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    g[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return g;
}

ExperimentConfig ExperimentConfig::from_settings(const Settings& s) {
  ExperimentConfig c;
  c.seed = to_u64(s, "seed");
  c.shape = SystemShape{static_cast<int>(to_int(s, "system.K")), static_cast<int>(to_int(s, "system.J"))};
  try {
    c.shape.validate();
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.truth = Params::from_values(
      {to_real(s, "truth.F"), to_real(s, "truth.h"), to_real(s, "truth.c"), to_real(s, "truth.b")});
  require(c.truth.c > 0.0, "truth.c must be > 0");
  c.integrator.dt = to_real(s, "integrator.dt");
  try {
    c.integrator.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  c.control_duration = to_real(s, "control.duration");
  c.control_spinup = to_real(s, "control.spinup");
  c.pooled_variances = to_bool(s, "control.pooled_variances");
  require(c.control_duration > 0.0, "control.duration must be > 0");
  require(c.control_spinup >= 0.0, "control.spinup must be >= 0");

  c.window = to_real(s, "window.T");
  c.window_fast = to_real(s, "window.T_fast");
  c.window_scan = to_real(s, "window.scan");
  require(c.window > 0.0 && c.window_fast > 0.0 && c.window_scan > 0.0, "windows must be > 0");

  c.noise_levels = parse_real_list(s.get("noise.levels"));
  require(!c.noise_levels.empty(), "noise.levels must not be empty");
  for (double r : c.noise_levels) require(r > 0.0, "noise levels must be > 0");
  c.noise_r = to_real(s, "noise.r");
  c.noise_r_fast = to_real(s, "noise.r_fast");
  require(c.noise_r > 0.0 && c.noise_r_fast > 0.0, "noise.r and noise.r_fast must be > 0");

  c.ensemble_sizes.clear();
  for (double m : parse_real_list(s.get("eki.ensemble_sizes"))) {
    require(m >= 2.0 && m == static_cast<int>(m), "eki.ensemble_sizes must be integers >= 2");
    c.ensemble_sizes.push_back(static_cast<int>(m));
  }
  require(!c.ensemble_sizes.empty(), "eki.ensemble_sizes must not be empty");
  c.eki.max_iter = static_cast<int>(to_int(s, "eki.max_iter"));
  c.eki.perturb_observations = to_bool(s, "eki.perturb");
  const auto& policy = s.get("eki.init_policy");
  if (policy == "shared") {
    c.eki.init_policy = EnsembleInitPolicy::shared;
  } else if (policy == "chained") {
    c.eki.init_policy = EnsembleInitPolicy::chained;
  } else {
    throw ConfigError("config: eki.init_policy must be shared|chained");
  }
  c.eki.collapse_tol = to_real(s, "eki.collapse_tol");
  c.eki.threads = static_cast<unsigned>(to_int(s, "eki.threads"));
  require(c.eki.max_iter >= 0, "eki.max_iter must be >= 0");

  c.mcmc.n_iter = static_cast<int>(to_int(s, "mcmc.n_iter"));
  c.mcmc.burn_in = static_cast<int>(to_int(s, "mcmc.burn_in"));
  c.mcmc.stride = static_cast<int>(to_int(s, "mcmc.stride"));
  c.mcmc.default_scale_factor = to_real(s, "mcmc.scale_factor");
  c.mcmc.adapt_during_burn_in = to_bool(s, "mcmc.adapt");
  try {
    c.mcmc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.bins = static_cast<int>(to_int(s, "mcmc.bins"));
  require(c.bins >= 1, "mcmc.bins must be >= 1");
  c.warm_start = s.get("mcmc.warm_start");
  require(c.warm_start == "eki" || c.warm_start == "prior" || c.warm_start == "truth",
          "mcmc.warm_start must be eki|prior|truth");
  c.warm_start_ensemble = static_cast<int>(to_int(s, "mcmc.warm_start_ensemble"));
  c.warm_start_iter = static_cast<int>(to_int(s, "mcmc.warm_start_iter"));
  require(c.warm_start_ensemble >= 2, "mcmc.warm_start_ensemble must be >= 2");

  c.x_fixed = to_real(s, "fast.x_fixed");
  c.fast_control_duration = to_real(s, "fast.control_duration");
  require(c.fast_control_duration > 0.0, "fast.control_duration must be > 0");

  c.scan_param = s.get("scan.param");
  require(param_from_name(c.scan_param).has_value(), "scan.param must be one of F|h|c|b");
  c.scan_grid = parse_grid(s.get("scan.grid"));
  require(!c.scan_grid.empty(), "scan.grid must not be empty");

  c.simulate_duration = to_real(s, "simulate.duration");
  c.simulate_sample_interval = to_real(s, "simulate.sample_interval");
  require(c.simulate_duration >= 0.0, "simulate.duration must be >= 0");
  require(c.simulate_sample_interval > 0.0, "simulate.sample_interval must be > 0");

  c.validate_identity_days = to_real(s, "validate.identity_days");
  c.validate_mcmc_steps = to_int(s, "validate.mcmc_steps");
  c.validate_eki_members = static_cast<int>(to_int(s, "validate.eki_members"));
  require(c.validate_identity_days > 0.0, "validate.identity_days must be > 0");
  return c;
}

}  // namespace l96cal
