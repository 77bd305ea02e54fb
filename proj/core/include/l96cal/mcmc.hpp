#pragma once

/// Random-walk Metropolis in unconstrained parameter coordinates.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "l96cal/objective.hpp"
#include "l96cal/priors.hpp"
#include "l96cal/random.hpp"

namespace l96cal {

struct MCMCConfig {
  int n_iter = 2200;
  int burn_in = 200;
  int stride = 2;
  /// Per-coordinate proposal std in unconstrained coordinates. Empty means
  /// default_scale_factor times the prior std of each coordinate.
  std::vector<double> proposal_scale;
  double default_scale_factor = 0.02;
  /// Rescale proposals during burn-in only, aiming for an acceptance rate in
  /// [adapt_low, adapt_high]. Frozen afterwards.
  bool adapt_during_burn_in = false;
  int adapt_interval = 50;
  double adapt_low = 0.2;
  double adapt_high = 0.3;
  bool keep_states = false;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Potential at an unconstrained point. `U` is the negative log posterior in
/// constrained coordinates; `U_unconstrained` subtracts the log-Jacobian and
/// is what the Metropolis rule compares.
struct PotentialValue {
  double U;
  double U_unconstrained;
};

using PotentialFn = std::function<PotentialValue(std::span<const double> u)>;

struct ChainPoint {
  std::vector<double> u;
  PotentialValue potential;
};

struct RwmOutcome {
  ChainPoint next;
  ChainPoint proposal;
  bool accepted;
};

/// One Metropolis step: u* = u + scale .* xi, xi ~ N(0, I); accept with
/// probability min(1, exp(U~ - U~*)). A non-finite U~* is always rejected.
RwmOutcome rwm_step(const ChainPoint& current, Rng& rng, std::span<const double> scale,
                    const PotentialFn& potential);

struct ChainRecord {
  int iter;  ///< 1-based
  std::vector<double> u;
  Params params;
  double U;
  bool accepted;
  Params proposal;
  double proposal_U;
  /// Trajectory state after this iteration's forward evaluation (keep_states only).
  std::shared_ptr<const TrajectoryState> state;
};

struct Chain {
  Params initial;
  double initial_U = 0.0;
  std::shared_ptr<const TrajectoryState> initial_state;
  std::vector<ChainRecord> records;
  std::vector<double> final_scale;
  double acceptance_rate = 0.0;
  /// Post-burn-in records (indices into `records`).
  std::vector<std::size_t> post_burn_in;
  /// Thinned subset of post_burn_in: even offsets from the first retained sample.
  std::vector<std::size_t> retained;

  std::vector<Params> retained_params() const;
};

using ParamsMap = std::function<Params(std::span<const double> u)>;

/// Generic driver over any potential. `to_params` maps unconstrained points to
/// reported parameters.
Chain run_rwm(const MCMCConfig& cfg, const PotentialFn& potential, std::span<const double> init_u,
              std::span<const double> scale, const ParamsMap& to_params);

/// Posterior U = J(theta) - log prior(theta) with the forward model chained:
/// every evaluation starts from the end state of the previous one.
class ChainedPosterior {
 public:
  ChainedPosterior(const ForwardModel& model, CalibrationTarget target, PriorSet priors,
                   TrajectoryState init_state, Params base = Params::truth());

  PotentialValue operator()(std::span<const double> u);
  const TrajectoryState& state() const { return state_; }
  const PriorSet& priors() const { return priors_; }
  const Params& base() const { return base_; }
  long long evaluations() const { return evaluations_; }
  long long blow_ups() const { return blow_ups_; }

 private:
  const ForwardModel& model_;
  CalibrationTarget target_;
  PriorSet priors_;
  TrajectoryState state_;
  Params base_;
  long long evaluations_ = 0;
  long long blow_ups_ = 0;
};

/// Full calibration chain started at @p init. Parameters not covered by
/// @p priors stay at their values in @p init.
Chain run_mcmc(const MCMCConfig& cfg, const ForwardModel& model, const CalibrationTarget& target,
               const PriorSet& priors, const Params& init, const TrajectoryState& init_state);

}  // namespace l96cal
