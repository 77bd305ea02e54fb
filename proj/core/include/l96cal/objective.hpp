#pragma once

/// Noise models, time-averaged forward statistics and the weighted
/// least-squares misfits J_o (full system) and J_s (single fast column).

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "l96cal/dynamics.hpp"
#include "l96cal/priors.hpp"
#include "l96cal/statistics.hpp"

namespace l96cal {

/// Diagonal misfit covariance diag = r^2 * variances.
class NoiseModel {
 public:
  /// Throws std::invalid_argument for r <= 0 or any variance that is not > 0.
  NoiseModel(double r, std::vector<double> variances);

  double r() const { return r_; }
  std::span<const double> variances() const { return variances_; }
  std::span<const double> diag() const { return diag_; }
  std::size_t size() const { return diag_.size(); }
  NoiseModel with_level(double r) const { return NoiseModel(r, variances_); }

 private:
  double r_;
  std::vector<double> variances_;
  std::vector<double> diag_;
};

/// 1/2 sum_i (sim_i - target_i)^2 / diag_i.
double weighted_misfit(std::span<const double> sim, std::span<const double> target,
                       const NoiseModel& noise);

struct FullForward {};
struct FastForward {
  double x_fixed = 2.556;
};
using ForwardDescriptor = std::variant<FullForward, FastForward>;

using TrajectoryState = std::variant<ModelState, FastColumnState>;

struct CalibrationTarget {
  MomentLayout layout;
  std::vector<double> mean;
  NoiseModel noise;
  double window;  ///< accumulation span T in days
  ForwardDescriptor forward;

  void validate() const;
  CalibrationTarget with_noise_level(double r) const;
};

enum class EvalStatus { ok, blow_up };

struct ForwardResult {
  EvalStatus status = EvalStatus::ok;
  std::vector<double> moments;  ///< empty on blow-up
  TrajectoryState final_state;  ///< equals the initial state on blow-up
  std::string message;
};

/// Parameters -> time-averaged moment vector, chaining trajectory state.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual std::size_t output_size() const = 0;
  virtual ForwardResult run(const Params& params, const TrajectoryState& init) const = 0;
};

/// Integrates the full or fast-only dynamics for `window` days and returns
/// the left-Riemann time average of moment_f / moment_g over post-step states.
/// No spin-up is discarded.
class MomentForwardModel final : public ForwardModel {
 public:
  MomentForwardModel(MomentLayout layout, double window, ForwardDescriptor forward,
                     IntegratorConfig cfg);
  static MomentForwardModel for_target(const CalibrationTarget& target, IntegratorConfig cfg);

  std::size_t output_size() const override { return layout_.size(); }
  ForwardResult run(const Params& params, const TrajectoryState& init) const override;

 private:
  MomentLayout layout_;
  double window_;
  ForwardDescriptor forward_;
  IntegratorConfig cfg_;
};

struct MisfitResult {
  double value = 0.0;  ///< +inf on blow-up
  EvalStatus status = EvalStatus::ok;
  std::vector<double> moments;
  TrajectoryState final_state;
};

MisfitResult evaluate_misfit(const ForwardModel& model, const Params& params,
                             const CalibrationTarget& target, const TrajectoryState& init);

/// J_o: full dynamics against a full-layout target.
MisfitResult evaluate_Jo(const Params& params, const CalibrationTarget& target,
                         const ModelState& init_state, const IntegratorConfig& cfg);

/// J_s: fast-only column dynamics against a fast-layout target; F is ignored.
MisfitResult evaluate_Js(const Params& params, const CalibrationTarget& target,
                         const FastColumnState& init_column, const IntegratorConfig& cfg);

/// U = J - sum_i log p_i(theta_i); +inf outside the prior support.
double potential_energy(const Params& params, double J_value, const PriorSet& priors);

}  // namespace l96cal
