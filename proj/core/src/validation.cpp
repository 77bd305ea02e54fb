#include "l96cal/validation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "l96cal/eki.hpp"
#include "l96cal/mcmc.hpp"
#include "l96cal/priors.hpp"
#include "l96cal/random.hpp"
#include "l96cal/rk4.hpp"
#include "l96cal/statistics.hpp"

namespace l96cal {

namespace {

CheckResult below(std::string name, double measured, double threshold) {
  return CheckResult{std::move(name), measured, "<", threshold, 0.0, measured < threshold};
}

CheckResult within(std::string name, double measured, double lo, double hi) {
  return CheckResult{std::move(name), measured, "in", lo, hi, measured >= lo && measured <= hi};
}

ModelState random_full_state(const SystemShape& shape, std::uint64_t seed) {
  auto s = ModelState::zeros(shape);
  Rng rng(seed);
  for (double& x : s.X) x = 3.0 * standard_normal(rng);
  for (double& y : s.Y) y = 0.3 * standard_normal(rng);
  return s;
}

std::vector<double> flat(const ModelState& s) {
  std::vector<double> u(s.X);
  u.insert(u.end(), s.Y.begin(), s.Y.end());
  return u;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

constexpr double kEnergySpinup = 20.0;

CheckResult check_energy_conservation(const ValidationOptions& opts) {
  const SystemShape shape = opts.shape;
  // Start from a point on the attractor of the full system rather than from
  // an arbitrary random state.
  auto state = random_initial_state(shape, derive_seed(opts.seed, "validate.energy"));
  state = integrate(state, opts.truth, shape, kEnergySpinup, opts.integrator);
  auto u = flat(state);
  const double e0 = std::inner_product(u.begin(), u.end(), u.begin(), 0.0);
  const double dt = opts.integrator.dt;
  const long long steps = step_count(1.0, dt);
  Rk4Stepper rk(u.size());
  const Params p = opts.truth;
  const std::size_t K = shape.slow_size();
  const bool corrupt = opts.corrupt_tendency;
  auto rhs = [&](std::span<const double> x, std::span<double> dx) {
    conservative_tendency_flat(x, dx, p, shape);
    if (corrupt) {
      // Flip -hc*Ybar to +hc*Ybar in the slow equation.
      const std::size_t J = static_cast<std::size_t>(shape.J);
      for (std::size_t k = 0; k < K; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < J; ++j) s += x[K + k * J + j];
        dx[k] += 2.0 * p.h * p.c * s / static_cast<double>(J);
      }
    }
  };
  for (long long i = 0; i < steps; ++i) rk.step(u, dt, rhs);
  const double e1 = std::inner_product(u.begin(), u.end(), u.begin(), 0.0);
  return below("energy_conservation_rel_drift", std::abs(e1 - e0) / e0, 1e-6);
}

CheckResult check_energy_tendency_identity(const ValidationOptions& opts) {
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    const auto state = random_full_state(opts.shape, derive_seed(opts.seed, "validate.identity", trial));
    const auto rate = conservative_tendency(state, opts.truth, opts.shape);
    double dot = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < state.X.size(); ++k) {
      dot += state.X[k] * rate.dX[k];
      scale += std::abs(state.X[k] * rate.dX[k]);
    }
    for (std::size_t n = 0; n < state.Y.size(); ++n) {
      dot += state.Y[n] * rate.dY[n];
      scale += std::abs(state.Y[n] * rate.dY[n]);
    }
    worst = std::max(worst, std::abs(dot) / scale);
  }
  return below("energy_tendency_identity_rel", worst, 1e-12);
}

CheckResult check_cyclic_equivariance(const ValidationOptions& opts) {
  const SystemShape s = opts.shape;
  const auto state = random_full_state(s, derive_seed(opts.seed, "validate.cyclic"));
  auto rotated = state;
  const std::size_t K = s.slow_size();
  const std::size_t J = static_cast<std::size_t>(s.J);
  for (std::size_t k = 0; k < K; ++k) {
    rotated.X[(k + 1) % K] = state.X[k];
    for (std::size_t j = 0; j < J; ++j) rotated.Y[((k + 1) % K) * J + j] = state.Y[k * J + j];
  }
  const auto a = full_tendency(state, opts.truth, s);
  const auto b = full_tendency(rotated, opts.truth, s);
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    worst = std::max(worst, std::abs(b.dX[(k + 1) % K] - a.dX[k]));
    scale = std::max(scale, std::abs(a.dX[k]));
    for (std::size_t j = 0; j < J; ++j) {
      worst = std::max(worst, std::abs(b.dY[((k + 1) % K) * J + j] - a.dY[k * J + j]));
      scale = std::max(scale, std::abs(a.dY[k * J + j]));
    }
  }
  return below("cyclic_equivariance_rel", worst / scale, 1e-12);
}

CheckResult check_integrator_order(const ValidationOptions& opts) {
  const SystemShape s = opts.shape;
  const auto state = random_full_state(s, derive_seed(opts.seed, "validate.order"));
  const double span = 0.1;
  const double coarse = 0.004;
  auto run = [&](double dt) {
    return flat(integrate(state, opts.truth, s, span, IntegratorConfig{dt}));
  };
  const auto ref = run(coarse / 100.0);
  const auto a = run(coarse);
  const auto b = run(coarse / 2.0);
  const double ratio = max_abs_diff(a, ref) / max_abs_diff(b, ref);
  return within("rk4_error_ratio_halving_dt", ratio, 12.0, 20.0);
}

std::vector<CheckResult> check_steady_state_identities(const ValidationOptions& opts) {
  const auto layout = MomentLayout::full(opts.shape);
  ControlRunOptions co;
  co.spinup = 20.0;
  const auto ctl = control_run_variances(opts.truth, opts.identity_days, layout, opts.integrator,
                                         derive_seed(opts.seed, "validate.steady"), co);
  const auto r = steady_state_residuals(ctl.mean, opts.truth, opts.shape);
  return {below("steady_state_slow_rel_residual", r.rel_slow, 0.02),
          below("steady_state_fast_rel_residual", r.rel_fast, 0.02)};
}

std::vector<CheckResult> check_linear_eki_oracle(const ValidationOptions& opts) {
  const int n = 5;
  const int d = 8;
  const int M = opts.eki_members;
  Rng rng = make_rng(opts.seed, "validate.linear_eki");
  auto randn = [&](int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = standard_normal(rng);
    return m;
  };
  const Eigen::MatrixXd A = randn(d, n);
  Eigen::MatrixXd L = 0.3 * randn(n, n);
  L = L.triangularView<Eigen::Lower>();
  L.diagonal().array() += 1.0;
  const Eigen::MatrixXd C0 = L * L.transpose();
  const Eigen::VectorXd m0 = 2.0 * randn(n, 1);
  const Eigen::VectorXd sigma = Eigen::VectorXd::Constant(d, 1e-2);
  const Eigen::VectorXd y = A * (m0 + randn(n, 1)) + sigma.cwiseSqrt().cwiseProduct(randn(d, 1));

  const Eigen::MatrixXd theta = (L * randn(n, M)).colwise() + m0;
  const Eigen::MatrixXd W = A * theta;
  const Eigen::MatrixXd updated = eki_update(theta, W, y, sigma, nullptr);
  const Eigen::VectorXd ens_mean = updated.rowwise().mean();

  // Closed-form Kalman mean update from the generating prior.
  const Eigen::MatrixXd S0 = A * C0 * A.transpose() + Eigen::MatrixXd(sigma.asDiagonal());
  const Eigen::VectorXd exact = m0 + C0 * A.transpose() * S0.inverse() * (y - A * m0);

  // Same formula fed the ensemble-empirical mean and covariance.
  const Eigen::VectorXd tbar = theta.rowwise().mean();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < M; ++j) {
    const Eigen::VectorXd dv = theta.col(j) - tbar;
    C += dv * dv.transpose();
  }
  C /= static_cast<double>(M);
  const Eigen::MatrixXd S = A * C * A.transpose() + Eigen::MatrixXd(sigma.asDiagonal());
  const Eigen::VectorXd empirical = tbar + C * A.transpose() * S.inverse() * (y - A * tbar);

  return {below("eki_linear_mean_vs_kalman_rel", (ens_mean - exact).norm() / exact.norm(), 1e-3),
          below("eki_linear_exact_covariance_rel",
                (ens_mean - empirical).norm() / empirical.norm(), 1e-8)};
}

std::vector<CheckResult> check_gaussian_mcmc(const ValidationOptions& opts) {
  const int dim = 4;
  MCMCConfig cfg;
  cfg.n_iter = static_cast<int>(opts.mcmc_steps);
  cfg.burn_in = std::min(1000, cfg.n_iter / 10);
  cfg.stride = 1;
  cfg.seed = derive_seed(opts.seed, "validate.gaussian_mcmc");
  const std::vector<double> init(dim, 0.0);
  const std::vector<double> scale(dim, 2.38 / std::sqrt(static_cast<double>(dim)));
  PotentialFn potential = [](std::span<const double> u) {
    double s = 0.0;
    for (double v : u) s += v * v;
    return PotentialValue{0.5 * s, 0.5 * s};
  };
  const auto chain = run_rwm(cfg, potential, init, scale, [](std::span<const double> u) {
    Params p;
    p.F = u[0];
    p.h = u[1];
    p.c = u[2];
    p.b = u[3];
    return p;
  });

  const std::size_t N = chain.post_burn_in.size();
  const std::size_t batches = 50;
  const std::size_t per = N / batches;
  double worst_z = 0.0;
  double worst_var = 0.0;
  for (int i = 0; i < dim; ++i) {
    std::vector<double> x;
    x.reserve(N);
    for (auto idx : chain.post_burn_in) x.push_back(chain.records[idx].u[static_cast<std::size_t>(i)]);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(N);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(N - 1);
    // Batch-means standard error of the chain mean.
    double bvar = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      double bm = 0.0;
      for (std::size_t k = b * per; k < (b + 1) * per; ++k) bm += x[k];
      bm /= static_cast<double>(per);
      bvar += (bm - mean) * (bm - mean);
    }
    bvar /= static_cast<double>(batches - 1);
    const double se = std::sqrt(bvar / static_cast<double>(batches));
    worst_z = std::max(worst_z, std::abs(mean) / se);
    worst_var = std::max(worst_var, std::abs(var - 1.0));
  }
  return {below("mcmc_gaussian_mean_max_z", worst_z, 3.0),
          below("mcmc_gaussian_variance_max_rel_err", worst_var, 0.15)};
}

std::vector<CheckResult> check_prior_normalization(const ValidationOptions& opts) {
  std::vector<CheckResult> out;
  const auto priors = PriorSet::defaults();
  for (const auto& e : priors.entries()) {
    const auto& spec = e.spec;
    const double sd = std::sqrt(spec.var);
    double lo = spec.mu - 12.0 * sd;
    double hi = spec.mu + 12.0 * sd;
    if (spec.kind == PriorKind::lognormal) {
      lo = std::exp(lo);
      hi = std::exp(hi);
    }
    // Composite Simpson on a uniform grid in the constrained coordinate.
    const int intervals = 200000;
    const double hstep = (hi - lo) / intervals;
    double s = std::exp(spec.log_pdf(lo)) + std::exp(spec.log_pdf(hi));
    for (int i = 1; i < intervals; ++i) {
      s += (i % 2 ? 4.0 : 2.0) * std::exp(spec.log_pdf(lo + hstep * i));
    }
    const double integral = s * hstep / 3.0;
    out.push_back(below("prior_" + std::string(param_name(e.id)) + "_normalization_abs_err",
                        std::abs(integral - 1.0), 1e-6));

    Rng rng = make_rng(opts.seed, "validate.prior_ks", static_cast<std::uint64_t>(e.id));
    const int n = 100000;
    std::vector<double> draws(n);
    for (double& v : draws) v = spec.sample(rng);
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
      const double F = spec.cdf(draws[static_cast<std::size_t>(i)]);
      ks = std::max({ks, std::abs(F - static_cast<double>(i) / n),
                     std::abs(F - static_cast<double>(i + 1) / n)});
    }
    // Asymptotic 1% critical value of the one-sample KS statistic.
    out.push_back(below("prior_" + std::string(param_name(e.id)) + "_ks_statistic", ks,
                        1.6276 / std::sqrt(static_cast<double>(n))));
  }
  return out;
}

std::vector<CheckResult> run_validation(const ValidationOptions& opts,
                                        const ProgressSink& progress) {
  std::vector<CheckResult> all;
  auto add = [&](CheckResult c) {
    if (progress) progress(c);
    all.push_back(std::move(c));
  };
  add(check_energy_conservation(opts));
  add(check_energy_tendency_identity(opts));
  add(check_cyclic_equivariance(opts));
  add(check_integrator_order(opts));
  for (auto& c : check_linear_eki_oracle(opts)) add(std::move(c));
  for (auto& c : check_gaussian_mcmc(opts)) add(std::move(c));
  for (auto& c : check_prior_normalization(opts)) add(std::move(c));
  for (auto& c : check_steady_state_identities(opts)) add(std::move(c));
  return all;
}

std::string format_check(const CheckResult& c) {
  std::ostringstream os;
  os.precision(6);
  os << (c.passed ? "PASS " : "FAIL ") << c.name << ": measured " << c.measured;
  if (c.relation == "in") {
    os << " in [" << c.threshold << ", " << c.threshold_hi << "]";
  } else {
    os << ' ' << c.relation << ' ' << c.threshold;
  }
  return os.str();
}

}  // namespace l96cal
