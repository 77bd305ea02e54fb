#pragma once

/// Perturbed-observation ensemble Kalman inversion.
///
/// Ensembles are stored column-wise: theta is (parameters x members) in
/// unconstrained coordinates, outputs is (data x members).

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "l96cal/objective.hpp"
#include "l96cal/priors.hpp"
#include "l96cal/random.hpp"

namespace l96cal {

/// How member integrations are initialised in each iteration.
enum class EnsembleInitPolicy {
  shared,   ///< every member, every iteration, starts from the one supplied state
  chained,  ///< each member continues from its own previous end state
};

struct EKIConfig {
  int ensemble_size = 100;
  int max_iter = 25;
  bool perturb_observations = true;
  EnsembleInitPolicy init_policy = EnsembleInitPolicy::shared;
  double collapse_tol = 1e-10;
  /// Worker threads for member evaluation; 0 uses hardware concurrency.
  unsigned threads = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ensemble cross-covariance C^{theta w} and output covariance C^{ww}, both
/// normalised by 1/M.
struct EnsembleCovariances {
  Eigen::MatrixXd theta_w;
  Eigen::MatrixXd w_w;
};
EnsembleCovariances ensemble_covariances(const Eigen::MatrixXd& theta,
                                         const Eigen::MatrixXd& outputs);

/// theta_j <- theta_j + C^{tw} (C^{ww} + Sigma)^{-1} (y + eta_j - w_j), with
/// eta_j ~ N(0, Sigma) drawn member by member from @p rng when it is non-null.
Eigen::MatrixXd eki_update(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& outputs,
                           const Eigen::VectorXd& target, const Eigen::VectorXd& noise_diag,
                           Rng* rng);

struct EnsembleIteration {
  int iter = 0;  ///< number of updates applied to this ensemble
  std::vector<Params> members;
  /// Forward outputs of these members (empty for the final ensemble).
  std::vector<std::vector<double>> outputs;
  std::vector<bool> blown;
  Params mean;
  std::array<double, 4> std{};
  std::array<double, 4> q25{};
  std::array<double, 4> q75{};
  double error_norm = 0.0;  ///< vs. truth, when supplied
  bool collapsed = false;
};

struct EnsembleRecord {
  std::vector<EnsembleIteration> iterations;
  bool collapsed = false;
  int collapse_iter = -1;
  long long blow_ups = 0;

  const EnsembleIteration& final() const { return iterations.back(); }
};

/// Summary statistics over member parameter vectors (population std).
void summarize_members(EnsembleIteration& it, const std::vector<ParamId>& calibrated,
                       const std::optional<Params>& truth, double collapse_tol);

/// Evaluate @p n jobs on up to @p threads workers; results land by index so
/// completion order never matters.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job);

EnsembleRecord run_eki(const EKIConfig& cfg, const ForwardModel& model,
                       const CalibrationTarget& target, const PriorSet& priors,
                       const TrajectoryState& init_state, const Params& base = Params::truth(),
                       const std::optional<Params>& truth = std::nullopt);

/// Same, from an explicit initial ensemble (constrained coordinates).
EnsembleRecord run_eki_from(const EKIConfig& cfg, const ForwardModel& model,
                            const CalibrationTarget& target, const PriorSet& priors,
                            std::vector<Params> members, const TrajectoryState& init_state,
                            const std::optional<Params>& truth = std::nullopt);

}  // namespace l96cal
