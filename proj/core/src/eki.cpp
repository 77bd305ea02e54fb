#include "l96cal/eki.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "l96cal/posterior.hpp"

namespace l96cal {

void EKIConfig::validate() const {
  if (ensemble_size < 2) throw std::invalid_argument("EKIConfig: ensemble size must be >= 2");
  if (max_iter < 0) throw std::invalid_argument("EKIConfig: max_iter must be >= 0");
  if (!(collapse_tol >= 0.0)) throw std::invalid_argument("EKIConfig: collapse_tol must be >= 0");
}

EnsembleCovariances ensemble_covariances(const Eigen::MatrixXd& theta,
                                         const Eigen::MatrixXd& outputs) {
  if (theta.cols() != outputs.cols()) {
    throw std::invalid_argument("ensemble_covariances: member count mismatch");
  }
  const double M = static_cast<double>(theta.cols());
  const Eigen::MatrixXd dtheta = theta.colwise() - theta.rowwise().mean();
  const Eigen::MatrixXd dw = outputs.colwise() - outputs.rowwise().mean();
  return EnsembleCovariances{dtheta * dw.transpose() / M, dw * dw.transpose() / M};
}

Eigen::MatrixXd eki_update(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& outputs,
                           const Eigen::VectorXd& target, const Eigen::VectorXd& noise_diag,
                           Rng* rng) {
  const Eigen::Index M = theta.cols();
  const Eigen::Index d = outputs.rows();
  if (M < 2) throw std::invalid_argument("eki_update: need at least two members");
  if (target.size() != d || noise_diag.size() != d) {
    throw std::invalid_argument("eki_update: target/noise length does not match outputs");
  }
  if ((noise_diag.array() <= 0.0).any()) {
    throw std::invalid_argument("eki_update: noise covariance must be positive definite");
  }

  const auto cov = ensemble_covariances(theta, outputs);
  Eigen::MatrixXd S = cov.w_w;
  S.diagonal() += noise_diag;

  Eigen::MatrixXd innovations(d, M);
  const Eigen::VectorXd noise_sd = noise_diag.array().sqrt();
  for (Eigen::Index j = 0; j < M; ++j) {
    Eigen::VectorXd y = target;
    if (rng) {
      for (Eigen::Index i = 0; i < d; ++i) y(i) += noise_sd(i) * standard_normal(*rng);
    }
    innovations.col(j) = y - outputs.col(j);
  }

  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("eki_update: C^ww + Sigma is not positive definite");
  }
  return theta + cov.theta_w * llt.solve(innovations);
}

void summarize_members(EnsembleIteration& it, const std::vector<ParamId>& calibrated,
                       const std::optional<Params>& truth, double collapse_tol) {
  const double M = static_cast<double>(it.members.size());
  std::array<double, 4> mean{};
  for (ParamId id : kAllParams) {
    const auto col = column(it.members, id);
    const auto i = static_cast<std::size_t>(id);
    double s = 0.0;
    for (double x : col) s += x;
    mean[i] = s / M;
    double ss = 0.0;
    for (double x : col) ss += (x - mean[i]) * (x - mean[i]);
    it.std[i] = std::sqrt(ss / M);
    it.q25[i] = quantile(col, 0.25);
    it.q75[i] = quantile(col, 0.75);
  }
  it.mean = Params::from_values(mean);
  it.error_norm = truth ? error_norm(it.mean, *truth) : 0.0;
  it.collapsed = std::all_of(calibrated.begin(), calibrated.end(), [&](ParamId id) {
    return it.std[static_cast<std::size_t>(id)] < collapse_tol;
  });
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            job(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

EnsembleRecord run_eki(const EKIConfig& cfg, const ForwardModel& model,
                       const CalibrationTarget& target, const PriorSet& priors,
                       const TrajectoryState& init_state, const Params& base,
                       const std::optional<Params>& truth) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, "eki.prior");
  std::vector<Params> members;
  members.reserve(static_cast<std::size_t>(cfg.ensemble_size));
  for (int j = 0; j < cfg.ensemble_size; ++j) members.push_back(priors.sample(rng, base));
  return run_eki_from(cfg, model, target, priors, std::move(members), init_state, truth);
}

EnsembleRecord run_eki_from(const EKIConfig& cfg, const ForwardModel& model,
                            const CalibrationTarget& target, const PriorSet& priors,
                            std::vector<Params> members, const TrajectoryState& init_state,
                            const std::optional<Params>& truth) {
  cfg.validate();
  target.validate();
  if (members.size() < 2) throw std::invalid_argument("run_eki: need at least two members");
  if (model.output_size() != target.layout.size()) {
    throw std::invalid_argument("run_eki: forward output size does not match target");
  }
  const auto M = members.size();
  const auto d = static_cast<Eigen::Index>(target.layout.size());
  const auto n = static_cast<Eigen::Index>(priors.size());
  const auto ids = priors.ids();

  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(target.mean.data(), d);
  const Eigen::VectorXd noise = Eigen::Map<const Eigen::VectorXd>(target.noise.diag().data(), d);
  Rng perturb_rng = make_rng(cfg.seed, "eki.perturbation");

  std::vector<TrajectoryState> states(M, init_state);
  EnsembleRecord record;

  for (int iter = 0; iter <= cfg.max_iter; ++iter) {
    EnsembleIteration it;
    it.iter = iter;
    it.members = members;
    summarize_members(it, ids, truth, cfg.collapse_tol);
    if (it.collapsed && !record.collapsed) {
      record.collapsed = true;
      record.collapse_iter = iter;
    }
    if (iter == cfg.max_iter) {
      record.iterations.push_back(std::move(it));
      break;
    }

    std::vector<ForwardResult> results(M);
    parallel_for(M, cfg.threads, [&](std::size_t j) {
      const TrajectoryState& start =
          cfg.init_policy == EnsembleInitPolicy::shared ? init_state : states[j];
      results[j] = model.run(members[j], start);
    });

    // Blown-up members take the mean prediction of the stable ones, which
    // leaves their innovation neutral apart from the data perturbation.
    Eigen::VectorXd good_mean = Eigen::VectorXd::Zero(d);
    std::size_t good = 0;
    for (const auto& r : results) {
      if (r.status == EvalStatus::ok) {
        good_mean += Eigen::Map<const Eigen::VectorXd>(r.moments.data(), d);
        ++good;
      }
    }
    if (good == 0) throw std::runtime_error("run_eki: every ensemble member blew up");
    good_mean /= static_cast<double>(good);

    Eigen::MatrixXd W(d, static_cast<Eigen::Index>(M));
    Eigen::MatrixXd theta(n, static_cast<Eigen::Index>(M));
    it.blown.resize(M);
    it.outputs.resize(M);
    for (std::size_t j = 0; j < M; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      if (results[j].status == EvalStatus::ok) {
        W.col(col) = Eigen::Map<const Eigen::VectorXd>(results[j].moments.data(), d);
      } else {
        W.col(col) = good_mean;
        it.blown[j] = true;
        ++record.blow_ups;
      }
      it.outputs[j].assign(W.col(col).data(), W.col(col).data() + d);
      const auto u = priors.to_unconstrained(members[j]);
      theta.col(col) = Eigen::Map<const Eigen::VectorXd>(u.data(), n);
      if (cfg.init_policy == EnsembleInitPolicy::chained) states[j] = std::move(results[j].final_state);
    }
    record.iterations.push_back(std::move(it));

    const Eigen::MatrixXd updated =
        eki_update(theta, W, y, noise, cfg.perturb_observations ? &perturb_rng : nullptr);
    for (std::size_t j = 0; j < M; ++j) {
      const Eigen::VectorXd u = updated.col(static_cast<Eigen::Index>(j));
      members[j] = priors.from_unconstrained(std::span<const double>(u.data(), u.size()), members[j]);
    }
  }
  return record;
}

}  // namespace l96cal
