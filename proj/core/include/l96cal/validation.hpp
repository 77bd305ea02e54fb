#pragma once

/// Property suite run by `l96cal validate`: conservation, steady-state
/// identities, integrator order, linear Kalman and Gaussian MCMC oracles and
/// prior normalisation.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "l96cal/dynamics.hpp"

namespace l96cal {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  std::string relation;  ///< "<", ">", "in"
  double threshold = 0.0;
  double threshold_hi = 0.0;  ///< upper bound for "in"
  bool passed = false;
};

struct ValidationOptions {
  SystemShape shape;
  Params truth;
  IntegratorConfig integrator;
  double identity_days = 1e4;
  long long mcmc_steps = 100000;
  int eki_members = 10000;
  std::uint64_t seed = 0;
  /// Test hook: flip the sign of the slow-fast coupling in the conservative
  /// tendency, which must make the conservation check fail.
  bool corrupt_tendency = false;
};

using ProgressSink = std::function<void(const CheckResult&)>;

std::vector<CheckResult> run_validation(const ValidationOptions& opts,
                                        const ProgressSink& progress = {});

// Individual checks, exposed for tests.
CheckResult check_energy_conservation(const ValidationOptions& opts);
CheckResult check_energy_tendency_identity(const ValidationOptions& opts);
CheckResult check_cyclic_equivariance(const ValidationOptions& opts);
CheckResult check_integrator_order(const ValidationOptions& opts);
std::vector<CheckResult> check_steady_state_identities(const ValidationOptions& opts);
std::vector<CheckResult> check_linear_eki_oracle(const ValidationOptions& opts);
std::vector<CheckResult> check_gaussian_mcmc(const ValidationOptions& opts);
std::vector<CheckResult> check_prior_normalization(const ValidationOptions& opts);

std::string format_check(const CheckResult& c);

}  // namespace l96cal
