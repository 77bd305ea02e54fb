#include "l96cal/mcmc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace l96cal {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void MCMCConfig::validate() const {
  if (n_iter < 1) throw std::invalid_argument("MCMCConfig: n_iter must be >= 1");
  if (burn_in < 0 || burn_in >= n_iter) {
    throw std::invalid_argument("MCMCConfig: burn_in must satisfy 0 <= burn_in < n_iter");
  }
  if (stride < 1) throw std::invalid_argument("MCMCConfig: stride must be >= 1");
  for (double s : proposal_scale) {
    if (!(s >= 0.0)) throw std::invalid_argument("MCMCConfig: proposal scales must be >= 0");
  }
  if (adapt_interval < 1) throw std::invalid_argument("MCMCConfig: adapt_interval must be >= 1");
}

RwmOutcome rwm_step(const ChainPoint& current, Rng& rng, std::span<const double> scale,
                    const PotentialFn& potential) {
  if (scale.size() != current.u.size()) {
    throw std::invalid_argument("rwm_step: scale dimension mismatch");
  }
  ChainPoint proposal;
  proposal.u.resize(current.u.size());
  for (std::size_t i = 0; i < current.u.size(); ++i) {
    proposal.u[i] = current.u[i] + scale[i] * standard_normal(rng);
  }
  proposal.potential = potential(proposal.u);
  // The uniform is always drawn so the random stream does not depend on U.
  const double log_u = std::log(uniform01(rng));
  const double dU = current.potential.U_unconstrained - proposal.potential.U_unconstrained;
  bool accept = false;
  if (std::isfinite(proposal.potential.U_unconstrained)) {
    accept = dU >= 0.0 || log_u < dU;
  }
  RwmOutcome out{accept ? proposal : current, proposal, accept};
  return out;
}

std::vector<Params> Chain::retained_params() const {
  std::vector<Params> out;
  out.reserve(retained.size());
  for (auto i : retained) out.push_back(records[i].params);
  return out;
}

namespace {

Chain run_rwm_impl(const MCMCConfig& cfg, const PotentialFn& potential,
                   std::span<const double> init_u, std::span<const double> scale_in,
                   const ParamsMap& to_params,
                   const std::function<std::shared_ptr<const TrajectoryState>()>& snapshot) {
  cfg.validate();
  if (scale_in.size() != init_u.size()) {
    throw std::invalid_argument("run_rwm: scale dimension mismatch");
  }
  Rng rng = make_rng(cfg.seed, "mcmc.proposal");
  std::vector<double> scale(scale_in.begin(), scale_in.end());

  Chain chain;
  ChainPoint current{std::vector<double>(init_u.begin(), init_u.end()), {}};
  current.potential = potential(current.u);
  chain.initial = to_params(current.u);
  chain.initial_U = current.potential.U;
  if (snapshot) chain.initial_state = snapshot();

  chain.records.reserve(static_cast<std::size_t>(cfg.n_iter));
  long long accepted_total = 0;
  int window_accepts = 0;
  int window_count = 0;
  for (int it = 1; it <= cfg.n_iter; ++it) {
    auto step = rwm_step(current, rng, scale, potential);
    current = std::move(step.next);
    accepted_total += step.accepted ? 1 : 0;

    ChainRecord rec;
    rec.iter = it;
    rec.u = current.u;
    rec.params = to_params(current.u);
    rec.U = current.potential.U;
    rec.accepted = step.accepted;
    rec.proposal = to_params(step.proposal.u);
    rec.proposal_U = step.proposal.potential.U;
    if (snapshot) rec.state = snapshot();
    chain.records.push_back(std::move(rec));

    if (cfg.adapt_during_burn_in && it <= cfg.burn_in) {
      window_accepts += step.accepted ? 1 : 0;
      if (++window_count == cfg.adapt_interval) {
        const double rate = static_cast<double>(window_accepts) / window_count;
        const double factor = rate < cfg.adapt_low ? 0.8 : (rate > cfg.adapt_high ? 1.25 : 1.0);
        for (double& s : scale) s *= factor;
        window_accepts = 0;
        window_count = 0;
      }
    }
  }

  chain.final_scale = scale;
  chain.acceptance_rate = static_cast<double>(accepted_total) / cfg.n_iter;
  for (std::size_t i = static_cast<std::size_t>(cfg.burn_in); i < chain.records.size(); ++i) {
    chain.post_burn_in.push_back(i);
    if ((i - static_cast<std::size_t>(cfg.burn_in)) % static_cast<std::size_t>(cfg.stride) == 0) {
      chain.retained.push_back(i);
    }
  }
  return chain;
}

}  // namespace

Chain run_rwm(const MCMCConfig& cfg, const PotentialFn& potential, std::span<const double> init_u,
              std::span<const double> scale, const ParamsMap& to_params) {
  return run_rwm_impl(cfg, potential, init_u, scale, to_params, {});
}

ChainedPosterior::ChainedPosterior(const ForwardModel& model, CalibrationTarget target,
                                   PriorSet priors, TrajectoryState init_state, Params base)
    : model_(model),
      target_(std::move(target)),
      priors_(std::move(priors)),
      state_(std::move(init_state)),
      base_(base) {
  target_.validate();
}

PotentialValue ChainedPosterior::operator()(std::span<const double> u) {
  const Params p = priors_.from_unconstrained(u, base_);
  const double log_prior = priors_.log_density(p);
  ++evaluations_;
  if (log_prior == -kInf) return {kInf, kInf};
  auto r = evaluate_misfit(model_, p, target_, state_);
  state_ = std::move(r.final_state);
  if (r.status == EvalStatus::blow_up) {
    ++blow_ups_;
    return {kInf, kInf};
  }
  const double U = r.value - log_prior;
  return {U, U - priors_.log_jacobian(u)};
}

Chain run_mcmc(const MCMCConfig& cfg, const ForwardModel& model, const CalibrationTarget& target,
               const PriorSet& priors, const Params& init, const TrajectoryState& init_state) {
  ChainedPosterior posterior(model, target, priors, init_state, init);
  std::vector<double> scale = cfg.proposal_scale;
  if (scale.empty()) {
    scale = priors.unconstrained_std();
    for (double& s : scale) s *= cfg.default_scale_factor;
  }
  if (scale.size() != priors.size()) {
    throw std::invalid_argument("run_mcmc: proposal scale dimension does not match priors");
  }
  const auto u0 = priors.to_unconstrained(init);
  PotentialFn fn = [&](std::span<const double> u) { return posterior(u); };
  ParamsMap to_params = [&](std::span<const double> u) {
    return priors.from_unconstrained(u, init);
  };
  std::function<std::shared_ptr<const TrajectoryState>()> snapshot;
  if (cfg.keep_states) {
    snapshot = [&] { return std::make_shared<const TrajectoryState>(posterior.state()); };
  }
  return run_rwm_impl(cfg, fn, u0, scale, to_params, snapshot);
}

}  // namespace l96cal
