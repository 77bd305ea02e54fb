#include <chrono>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "l96cal/eki.hpp"
#include "l96cal/mcmc.hpp"
#include "l96cal/posterior.hpp"
#include "l96cal/random.hpp"

using namespace l96cal;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

PotentialFn constant_potential(double U) {
  return [U](std::span<const double>) { return PotentialValue{U, U}; };
}

PotentialFn gaussian_potential() {
  return [](std::span<const double> u) {
    double s = 0.0;
    for (double x : u) s += x * x;
    return PotentialValue{0.5 * s, 0.5 * s};
  };
}

Params identity_params(std::span<const double> u) {
  Params p;
  p.F = u.size() > 0 ? u[0] : 0.0;
  p.h = u.size() > 1 ? u[1] : 0.0;
  p.c = u.size() > 2 ? u[2] : 0.0;
  p.b = u.size() > 3 ? u[3] : 0.0;
  return p;
}

// Forward model w = A * theta (constrained coordinates), output size d.
class LinearModel final : public ForwardModel {
 public:
  LinearModel(Eigen::MatrixXd A, bool jitter = false) : A_(std::move(A)), jitter_(jitter) {}
  std::size_t output_size() const override { return static_cast<std::size_t>(A_.rows()); }
  ForwardResult run(const Params& p, const TrajectoryState& init) const override {
    if (jitter_) {
      // Scramble completion order across worker threads.
      const auto h = static_cast<unsigned>(std::fabs(p.F * 1e6)) % 5;
      std::this_thread::sleep_for(std::chrono::microseconds(50 * h));
    }
    Eigen::Vector4d th(p.F, p.h, p.c, p.b);
    const Eigen::VectorXd w = A_ * th;
    ForwardResult r;
    r.moments.assign(w.data(), w.data() + w.size());
    r.final_state = init;
    return r;
  }

 private:
  Eigen::MatrixXd A_;
  bool jitter_;
};

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = standard_normal(rng);
  return m;
}

// Dense straight-line Kalman update: explicit sums for the covariances and
// Gauss-Jordan elimination for the solve.
Eigen::MatrixXd oracle_update(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& W,
                              const Eigen::VectorXd& y, const Eigen::VectorXd& noise) {
  const int n = static_cast<int>(theta.rows()), d = static_cast<int>(W.rows()),
            M = static_cast<int>(theta.cols());
  std::vector<double> tm(static_cast<std::size_t>(n), 0.0), wm(static_cast<std::size_t>(d), 0.0);
  for (int j = 0; j < M; ++j) {
    for (int i = 0; i < n; ++i) tm[static_cast<std::size_t>(i)] += theta(i, j) / M;
    for (int i = 0; i < d; ++i) wm[static_cast<std::size_t>(i)] += W(i, j) / M;
  }
  std::vector<std::vector<double>> ctw(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d), 0.0));
  std::vector<std::vector<double>> S(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d), 0.0));
  for (int j = 0; j < M; ++j) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < d; ++b)
        ctw[a][b] += (theta(a, j) - tm[a]) * (W(b, j) - wm[b]) / M;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) S[a][b] += (W(a, j) - wm[a]) * (W(b, j) - wm[b]) / M;
  }
  for (int a = 0; a < d; ++a) S[a][a] += noise(a);
  // Invert S by Gauss-Jordan with partial pivoting.
  std::vector<std::vector<double>> inv(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d), 0.0));
  for (int a = 0; a < d; ++a) inv[a][a] = 1.0;
  for (int col = 0; col < d; ++col) {
    int piv = col;
    for (int r = col + 1; r < d; ++r)
      if (std::abs(S[r][col]) > std::abs(S[piv][col])) piv = r;
    std::swap(S[col], S[piv]);
    std::swap(inv[col], inv[piv]);
    const double p = S[col][col];
    for (int c = 0; c < d; ++c) {
      S[col][c] /= p;
      inv[col][c] /= p;
    }
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = S[r][col];
      for (int c = 0; c < d; ++c) {
        S[r][c] -= f * S[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  Eigen::MatrixXd out = theta;
  for (int j = 0; j < M; ++j) {
    for (int a = 0; a < n; ++a) {
      double inc = 0.0;
      for (int b = 0; b < d; ++b) {
        double gain = 0.0;
        for (int c = 0; c < d; ++c) gain += ctw[a][c] * inv[c][b];
        inc += gain * (y(b) - W(b, j));
      }
      out(a, j) += inc;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("Metropolis rule: downhill and infinite proposals") {
  Rng rng(1);
  const std::vector<double> scale{1.0};
  ChainPoint cur{{0.0}, {5.0, 5.0}};
  for (int i = 0; i < 100; ++i) CHECK(rwm_step(cur, rng, scale, constant_potential(4.0)).accepted);
  for (int i = 0; i < 100; ++i) CHECK_FALSE(rwm_step(cur, rng, scale, constant_potential(kInf)).accepted);
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(rwm_step(cur, rng, scale, constant_potential(nan)).accepted);
}

TEST_CASE("Metropolis rule: acceptance frequency at dU = log 2") {
  Rng rng(2);
  const std::vector<double> scale{1.0};
  ChainPoint cur{{0.0}, {0.0, 0.0}};
  const int n = 10000;
  int acc = 0;
  for (int i = 0; i < n; ++i) acc += rwm_step(cur, rng, scale, constant_potential(std::log(2.0))).accepted;
  const double se = std::sqrt(0.25 / n);
  CHECK(std::abs(static_cast<double>(acc) / n - 0.5) < 3 * se);
}

TEST_CASE("Metropolis kernel preserves a 3-state target") {
  // Continuous embedding: u in cell i = round(u) carries mass pi_i.
  const double pi[3] = {0.2, 0.5, 0.3};
  PotentialFn pot = [&](std::span<const double> u) {
    const double r = std::round(u[0]);
    if (r < 0 || r > 2) return PotentialValue{kInf, kInf};
    const double U = -std::log(pi[static_cast<int>(r)]);
    return PotentialValue{U, U};
  };
  Rng rng(3);
  const std::vector<double> scale{1.0};
  ChainPoint cur{{1.0}, pot(std::vector<double>{1.0})};
  double counts[3] = {0, 0, 0};
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    cur = rwm_step(cur, rng, scale, pot).next;
    counts[static_cast<int>(std::round(cur.u[0]))] += 1;
  }
  double tv = 0.0;
  for (int i = 0; i < 3; ++i) tv += 0.5 * std::abs(counts[i] / n - pi[i]);
  CHECK(tv < 0.01);
}

TEST_CASE("RWM on a standard 4-D Gaussian") {
  MCMCConfig cfg;
  cfg.n_iter = 100000;
  cfg.burn_in = 0;
  cfg.stride = 1;
  cfg.seed = 11;
  const std::vector<double> init(4, 0.0), scale(4, 2.38 / 2.0);
  const auto chain = run_rwm(cfg, gaussian_potential(), init, scale, identity_params);
  const int batches = 50;
  const std::size_t per = chain.records.size() / batches;
  for (int d = 0; d < 4; ++d) {
    std::vector<double> bm(batches, 0.0);
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < chain.records.size(); ++i) {
      const double x = chain.records[i].u[static_cast<std::size_t>(d)];
      sum += x;
      sq += x * x;
      bm[i / per] += x / static_cast<double>(per);
    }
    const double n = static_cast<double>(chain.records.size());
    const double mean = sum / n;
    double bvar = 0.0;
    for (double b : bm) bvar += (b - mean) * (b - mean) / (batches - 1);
    const double se = std::sqrt(bvar / batches);
    CHECK(std::abs(mean) < 3 * se);
    CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.15);
  }
}

TEST_CASE("chain bookkeeping") {
  MCMCConfig cfg;
  cfg.seed = 4;
  const std::vector<double> init(2, 0.0), scale(2, 0.5);
  SUBCASE("defaults retain 2000 and keep 1000 after thinning") {
    const auto chain = run_rwm(cfg, gaussian_potential(), init, scale, identity_params);
    CHECK(chain.records.size() == 2200);
    CHECK(chain.post_burn_in.size() == 2000);
    CHECK(chain.retained.size() == 1000);
    CHECK(chain.retained.front() == 200);
    CHECK(chain.retained[1] == 202);
  }
  SUBCASE("n_iter = burn_in + 2") {
    cfg.n_iter = cfg.burn_in + 2;
    const auto chain = run_rwm(cfg, gaussian_potential(), init, scale, identity_params);
    CHECK(chain.post_burn_in.size() == 2);
    CHECK(chain.retained.size() == 1);
  }
  SUBCASE("zero proposal scale never moves") {
    const std::vector<double> zero(2, 0.0);
    cfg.n_iter = 300;
    const auto chain = run_rwm(cfg, gaussian_potential(), std::vector<double>{0.3, -0.2}, zero,
                               identity_params);
    CHECK(chain.acceptance_rate == 1.0);
    for (const auto& r : chain.records) CHECK(r.u == std::vector<double>{0.3, -0.2});
  }
  SUBCASE("identical seeds give bitwise identical chains") {
    const auto a = run_rwm(cfg, gaussian_potential(), init, scale, identity_params);
    const auto b = run_rwm(cfg, gaussian_potential(), init, scale, identity_params);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].u == b.records[i].u);
      CHECK(a.records[i].U == b.records[i].U);
    }
  }
  SUBCASE("invalid configurations") {
    cfg.burn_in = cfg.n_iter;
    CHECK_THROWS(cfg.validate());
    cfg.burn_in = 10;
    cfg.stride = 0;
    CHECK_THROWS(cfg.validate());
  }
}

TEST_CASE("burn-in adaptation is frozen afterwards") {
  MCMCConfig cfg;
  cfg.seed = 8;
  cfg.adapt_during_burn_in = true;
  const std::vector<double> init(4, 0.0), scale(4, 0.01);
  const auto chain = run_rwm(cfg, gaussian_potential(), init, scale, identity_params);
  // Tiny steps accept nearly always, so adaptation grows the scale by 1.25
  // at each of the four burn-in checkpoints and never again.
  CHECK(chain.final_scale[0] == doctest::Approx(0.01 * std::pow(1.25, 4)));
}

TEST_CASE("EKI update: trivial cases") {
  Rng rng(5);
  const Eigen::VectorXd noise = Eigen::VectorXd::Constant(3, 0.1);
  SUBCASE("collapsed ensemble does not move") {
    Eigen::MatrixXd theta(2, 5);
    theta.colwise() = Eigen::Vector2d(1.0, -2.0);
    const Eigen::MatrixXd W = random_matrix(3, 5, rng);
    const Eigen::VectorXd y = Eigen::VectorXd::Random(3);
    const auto out = eki_update(theta, W, y, noise, &rng);
    CHECK((out - theta).norm() == 0.0);
  }
  SUBCASE("outputs equal to the data give zero increments") {
    const Eigen::MatrixXd theta = random_matrix(2, 5, rng);
    const Eigen::VectorXd y = Eigen::Vector3d(0.3, -1.0, 2.0);
    Eigen::MatrixXd W(3, 5);
    W.colwise() = y;
    const auto out = eki_update(theta, W, y, noise, nullptr);
    CHECK((out - theta).norm() == 0.0);
  }
  SUBCASE("argument checks") {
    const Eigen::MatrixXd theta = random_matrix(2, 1, rng);
    CHECK_THROWS(eki_update(theta, random_matrix(3, 1, rng), Eigen::VectorXd::Zero(3), noise, nullptr));
    CHECK_THROWS(eki_update(random_matrix(2, 4, rng), random_matrix(3, 4, rng),
                            Eigen::VectorXd::Zero(2), noise, nullptr));
  }
}

TEST_CASE("EKI update matches a dense Kalman oracle on a linear model") {
  Rng rng(6);
  const Eigen::Index n = 5, d = 8, M = 40;
  const Eigen::MatrixXd A = random_matrix(d, n, rng);
  const Eigen::MatrixXd theta = random_matrix(n, M, rng);
  const Eigen::MatrixXd W = A * theta;
  const Eigen::VectorXd y = random_matrix(d, 1, rng);
  const Eigen::VectorXd noise = Eigen::VectorXd::Constant(d, 1e-2);
  const auto ours = eki_update(theta, W, y, noise, nullptr);
  const auto ref = oracle_update(theta, W, y, noise);
  CHECK((ours - ref).norm() / ref.norm() < 1e-8);
}

TEST_CASE("EKI ensemble mean approaches the closed-form Kalman mean for large M") {
  Rng rng(7);
  const Eigen::Index n = 5, d = 8, M = 10000;
  const Eigen::MatrixXd A = random_matrix(d, n, rng);
  Eigen::MatrixXd L = random_matrix(n, n, rng).triangularView<Eigen::Lower>();
  L.diagonal() = L.diagonal().cwiseAbs().array() + 0.5;
  const Eigen::VectorXd m0 = 2.0 * random_matrix(n, 1, rng);
  Eigen::MatrixXd theta = L * random_matrix(n, M, rng);
  theta.colwise() += m0;
  const Eigen::VectorXd y = random_matrix(d, 1, rng);
  const Eigen::VectorXd noise = Eigen::VectorXd::Constant(d, 1e-2);
  const auto updated = eki_update(theta, A * theta, y, noise, nullptr);
  const Eigen::MatrixXd C = L * L.transpose();
  const Eigen::MatrixXd S = A * C * A.transpose() + Eigen::MatrixXd(noise.asDiagonal());
  const Eigen::VectorXd kalman = m0 + C * A.transpose() * S.ldlt().solve(y - A * m0);
  const Eigen::VectorXd mean = updated.rowwise().mean();
  MESSAGE("relative mean error " << (mean - kalman).norm() / kalman.norm());
  // Sampling error of the ensemble moments is O(1/sqrt(M)).
  CHECK((mean - kalman).norm() / kalman.norm() < 1e-2);
}

TEST_CASE("EKI subspace property") {
  Rng rng(8);
  const Eigen::Index n = 4, d = 6, M = 3;
  const Eigen::MatrixXd theta = random_matrix(n, M, rng);
  const Eigen::MatrixXd A = random_matrix(d, n, rng);
  Eigen::MatrixXd W = A * theta;
  W = W.array().sin().matrix();  // nonlinear forward map
  const auto out = eki_update(theta, W, random_matrix(d, 1, rng), Eigen::VectorXd::Constant(d, 0.3), nullptr);
  // Each updated member lies in theta_1 + span{theta_j - theta_1}.
  Eigen::MatrixXd basis(n, M - 1);
  for (Eigen::Index j = 1; j < M; ++j) basis.col(j - 1) = theta.col(j) - theta.col(0);
  for (Eigen::Index j = 0; j < M; ++j) {
    const Eigen::VectorXd v = out.col(j) - theta.col(0);
    const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(v);
    CHECK((basis * coef - v).norm() < 1e-8);
  }
}

TEST_CASE("EKI update is invariant to rescaling data units") {
  Rng rng(9);
  const Eigen::MatrixXd theta = random_matrix(4, 20, rng);
  const Eigen::MatrixXd W = random_matrix(7, 4, rng) * theta;
  const Eigen::VectorXd y = random_matrix(7, 1, rng);
  Eigen::VectorXd noise(7);
  for (Eigen::Index i = 0; i < 7; ++i) noise(i) = 0.1 + uniform01(rng);
  const double alpha = 37.5;
  const auto a = eki_update(theta, W, y, noise, nullptr);
  const auto b = eki_update(theta, alpha * W, alpha * y, alpha * alpha * noise, nullptr);
  CHECK((a - b).norm() / (a - theta).norm() < 1e-10);
}

TEST_CASE("run_eki on a linear model") {
  Rng rng(10);
  const Eigen::MatrixXd A = random_matrix(9, 4, rng);
  const LinearModel model(A);
  const Eigen::Vector4d truth(10.0, 1.0, 10.0, 10.0);
  const Eigen::VectorXd y = A * truth;
  CalibrationTarget target{MomentLayout::fast(3), std::vector<double>(y.data(), y.data() + 9),
                           NoiseModel(1.0, std::vector<double>(9, 1e-4)), 1.0, FastForward{}};
  REQUIRE(target.layout.size() == 9);
  EKIConfig cfg;
  cfg.ensemble_size = 50;
  cfg.max_iter = 10;
  cfg.seed = 3;
  cfg.threads = 1;
  const auto rec = run_eki(cfg, model, target, PriorSet::defaults(), FastColumnState{}, Params::truth(),
                           Params::truth());
  CHECK(rec.iterations.size() == 11);
  CHECK(rec.iterations.back().outputs.empty());
  CHECK(rec.iterations.front().outputs.size() == 50);
  CHECK(rec.final().error_norm < rec.iterations.front().error_norm);
  MESSAGE("error norm " << rec.iterations.front().error_norm << " -> " << rec.final().error_norm);

  // Recorded summaries are recomputable from the stored members.
  for (const auto& it : rec.iterations) {
    auto copy = it;
    summarize_members(copy, PriorSet::defaults().ids(), Params::truth(), cfg.collapse_tol);
    CHECK(copy.mean.values() == it.mean.values());
    CHECK(copy.std == it.std);
    CHECK(copy.q25 == it.q25);
  }

  SUBCASE("completion order does not matter") {
    const LinearModel jittery(A, true);
    auto par = cfg;
    par.threads = 6;
    const auto rp = run_eki(par, jittery, target, PriorSet::defaults(), FastColumnState{},
                            Params::truth(), Params::truth());
    for (std::size_t i = 0; i < rec.iterations.size(); ++i)
      for (std::size_t j = 0; j < 50; ++j)
        CHECK(rp.iterations[i].members[j].values() == rec.iterations[i].members[j].values());
  }
}

TEST_CASE("run_eki flags a collapsed ensemble") {
  const LinearModel model(Eigen::MatrixXd::Identity(4, 4));
  CalibrationTarget target{MomentLayout::fast(1), {10.0, 1.0}, NoiseModel(1.0, {1.0, 1.0}), 1.0,
                           FastForward{}};
  // A 4-output model cannot feed a 2-entry target.
  CHECK_THROWS(run_eki(EKIConfig{}, model, target, PriorSet::defaults(), FastColumnState{}));

  const LinearModel two(Eigen::MatrixXd::Identity(2, 4));
  std::vector<Params> same(5, Params::truth());
  EKIConfig cfg;
  cfg.ensemble_size = 5;
  cfg.max_iter = 2;
  cfg.threads = 1;
  const auto rec = run_eki_from(cfg, two, target, PriorSet::defaults(), same, FastColumnState{});
  CHECK(rec.collapsed);
  CHECK(rec.collapse_iter == 0);
  for (const auto& m : rec.final().members)
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(m.values()[i] == doctest::Approx(Params::truth().values()[i]).epsilon(1e-14));
}

TEST_CASE("blown-up members take the mean prediction of the stable ones") {
  class Fragile final : public ForwardModel {
   public:
    std::size_t output_size() const override { return 2; }
    ForwardResult run(const Params& p, const TrajectoryState& init) const override {
      ForwardResult r;
      r.final_state = init;
      if (p.b > 12.0) {
        r.status = EvalStatus::blow_up;
        return r;
      }
      r.moments = {p.F, p.b};
      return r;
    }
  };
  const Fragile model;
  CalibrationTarget target{MomentLayout::fast(1), {10.0, 10.0}, NoiseModel(1.0, {0.01, 0.01}), 1.0,
                           FastForward{}};
  std::vector<Params> members;
  for (double b : {8.0, 9.0, 11.0, 13.0, 14.0}) members.push_back(Params{9.0 + b / 10.0, 1.0, 10.0, b});
  EKIConfig cfg;
  cfg.ensemble_size = 5;
  cfg.max_iter = 1;
  cfg.perturb_observations = false;
  cfg.threads = 1;
  const auto rec = run_eki_from(cfg, model, target, PriorSet::defaults(), members, FastColumnState{});
  const auto& it = rec.iterations.front();
  CHECK(rec.blow_ups == 2);
  CHECK(it.blown == std::vector<bool>{false, false, false, true, true});
  const double mean_b = (8.0 + 9.0 + 11.0) / 3.0;
  CHECK(it.outputs[3][1] == doctest::Approx(mean_b));
  CHECK(it.outputs[4][1] == doctest::Approx(mean_b));
}

TEST_CASE("parallel_for propagates exceptions") {
  CHECK_THROWS(parallel_for(20, 4, [](std::size_t i) {
    if (i == 13) throw std::runtime_error("boom");
  }));
}

TEST_CASE("histograms") {
  const std::vector<double> same(10, 3.0);
  const auto h1 = histogram(same, 30);
  CHECK(h1.bins() == 1);
  CHECK(h1.mass[0] == 1.0);
  CHECK_THROWS(histogram(same, 0));

  Rng rng(12);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = 2.0 + 1.5 * standard_normal(rng);
  const auto h = histogram(xs, 30);
  double total = 0.0, tv = 0.0;
  for (std::size_t i = 0; i < h.bins(); ++i) {
    total += h.mass[i];
    // Exact analytic mass of the bin via the normal CDF.
    auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    const double p = Phi((h.edges[i + 1] - 2.0) / 1.5) - Phi((h.edges[i] - 2.0) / 1.5);
    tv += 0.5 * std::abs(h.mass[i] - p);
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
  CHECK(tv < 0.05);
}

TEST_CASE("quantiles and marginal summaries") {
  CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
  CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({4, 1, 3, 2}, 1.0) == 4.0);
  const auto m = summarize_marginal(std::vector<double>{1, 2, 3, 4}, 3);
  CHECK(m.mean == 2.5);
  CHECK(m.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
}

TEST_CASE("error norm") {
  CHECK(error_norm(Params{9, 1, 10, 10}, Params::truth()) == 1.0);
  CHECK(error_norm(Params::truth(), Params::truth()) == 0.0);
  CHECK(error_norm(Params{9.63, 0.982, 8.34, 9.93}, Params::truth()) == doctest::Approx(1.702).epsilon(5e-4));
}
