#include "l96cal/objective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace l96cal {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

NoiseModel::NoiseModel(double r, std::vector<double> variances)
    : r_(r), variances_(std::move(variances)), diag_(variances_.size()) {
  if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("NoiseModel: r must be > 0");
  for (std::size_t i = 0; i < variances_.size(); ++i) {
    if (!(variances_[i] > 0.0) || !std::isfinite(variances_[i])) {
      throw std::invalid_argument("NoiseModel: variance entry " + std::to_string(i) +
                                  " is not positive");
    }
    diag_[i] = r * r * variances_[i];
  }
}

double weighted_misfit(std::span<const double> sim, std::span<const double> target,
                       const NoiseModel& noise) {
  if (sim.size() != target.size() || sim.size() != noise.size()) {
    throw ShapeError("weighted_misfit: length mismatch");
  }
  const auto diag = noise.diag();
  double s = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    const double d = sim[i] - target[i];
    s += d * d / diag[i];
  }
  return 0.5 * s;
}

void CalibrationTarget::validate() const {
  if (mean.size() != layout.size()) throw ShapeError("CalibrationTarget: target length mismatch");
  if (noise.size() != layout.size()) throw ShapeError("CalibrationTarget: noise length mismatch");
  if (!(window > 0.0)) throw std::invalid_argument("CalibrationTarget: window must be > 0");
  const bool fast_forward = std::holds_alternative<FastForward>(forward);
  if (fast_forward != (layout.variant() == LayoutVariant::fast)) {
    throw std::invalid_argument("CalibrationTarget: forward model does not match layout");
  }
}

CalibrationTarget CalibrationTarget::with_noise_level(double r) const {
  CalibrationTarget t = *this;
  t.noise = noise.with_level(r);
  return t;
}

MomentForwardModel::MomentForwardModel(MomentLayout layout, double window,
                                       ForwardDescriptor forward, IntegratorConfig cfg)
    : layout_(layout), window_(window), forward_(forward), cfg_(cfg) {
  cfg_.validate();
  if (!(window_ > 0.0)) throw std::invalid_argument("MomentForwardModel: window must be > 0");
}

MomentForwardModel MomentForwardModel::for_target(const CalibrationTarget& target,
                                                  IntegratorConfig cfg) {
  target.validate();
  return MomentForwardModel(target.layout, target.window, target.forward, cfg);
}

ForwardResult MomentForwardModel::run(const Params& params, const TrajectoryState& init) const {
  RunningAverage avg(layout_);
  std::vector<double> sample(layout_.size());
  ForwardResult out;
  try {
    if (const auto* fast = std::get_if<FastForward>(&forward_)) {
      const auto* col = std::get_if<FastColumnState>(&init);
      if (!col) throw std::invalid_argument("MomentForwardModel: fast model needs a column state");
      if (col->Y.size() != static_cast<std::size_t>(layout_.shape().J)) {
        throw ShapeError("MomentForwardModel: column length mismatch");
      }
      out.final_state = integrate_fast(*col, params, fast->x_fixed, window_, cfg_,
                                       [&](std::span<const double> y, double) {
                                         moment_g(y, sample);
                                         avg.accumulate(sample, cfg_.dt);
                                       });
    } else {
      const auto* state = std::get_if<ModelState>(&init);
      if (!state) throw std::invalid_argument("MomentForwardModel: full model needs a ModelState");
      const SystemShape shape = layout_.shape();
      out.final_state = integrate(*state, params, shape, window_, cfg_, [&](const StateView& v) {
        moment_f(v.X, v.Y, shape, sample);
        avg.accumulate(sample, cfg_.dt);
      });
    }
  } catch (const IntegrationBlowUp& e) {
    out.status = EvalStatus::blow_up;
    out.final_state = init;
    out.message = e.what();
    return out;
  }
  out.moments = avg.mean();
  return out;
}

MisfitResult evaluate_misfit(const ForwardModel& model, const Params& params,
                             const CalibrationTarget& target, const TrajectoryState& init) {
  auto fwd = model.run(params, init);
  MisfitResult r;
  r.status = fwd.status;
  r.final_state = std::move(fwd.final_state);
  if (fwd.status == EvalStatus::blow_up) {
    r.value = kInf;
    return r;
  }
  r.value = weighted_misfit(fwd.moments, target.mean, target.noise);
  r.moments = std::move(fwd.moments);
  return r;
}

MisfitResult evaluate_Jo(const Params& params, const CalibrationTarget& target,
                         const ModelState& init_state, const IntegratorConfig& cfg) {
  if (target.layout.variant() != LayoutVariant::full) {
    throw std::invalid_argument("evaluate_Jo: target must use the full layout");
  }
  const auto model = MomentForwardModel::for_target(target, cfg);
  return evaluate_misfit(model, params, target, init_state);
}

MisfitResult evaluate_Js(const Params& params, const CalibrationTarget& target,
                         const FastColumnState& init_column, const IntegratorConfig& cfg) {
  if (target.layout.variant() != LayoutVariant::fast) {
    throw std::invalid_argument("evaluate_Js: target must use the fast layout");
  }
  const auto model = MomentForwardModel::for_target(target, cfg);
  return evaluate_misfit(model, params, target, init_column);
}

double potential_energy(const Params& params, double J_value, const PriorSet& priors) {
  const double lp = priors.log_density(params);
  if (lp == -kInf) return kInf;
  return J_value - lp;
}

}  // namespace l96cal
