#include "l96cal/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "l96cal/rk4.hpp"

namespace l96cal {

void SystemShape::validate() const {
  if (K < 4) throw ShapeError("SystemShape: K must be >= 4, got " + std::to_string(K));
  if (J < 4) throw ShapeError("SystemShape: J must be >= 4, got " + std::to_string(J));
}

std::string_view param_name(ParamId id) { return kParamNames[static_cast<std::size_t>(id)]; }

std::optional<ParamId> param_from_name(std::string_view name) {
  for (ParamId id : kAllParams) {
    if (param_name(id) == name) return id;
  }
  return std::nullopt;
}

double& Params::operator[](ParamId id) {
  switch (id) {
    case ParamId::F: return F;
    case ParamId::h: return h;
    case ParamId::c: return c;
    case ParamId::b: return b;
  }
  throw std::out_of_range("Params: bad id");
}

double Params::operator[](ParamId id) const { return const_cast<Params&>(*this)[id]; }

Params Params::from_values(const std::array<double, 4>& v) {
  Params p;
  p.F = v[0];
  p.h = v[1];
  p.c = v[2];
  p.b = v[3];
  return p;
}

std::string to_string(const Params& p) {
  std::ostringstream os;
  os.precision(17);
  os << "(F=" << p.F << ", h=" << p.h << ", c=" << p.c << ", b=" << p.b << ")";
  return os.str();
}

ModelState ModelState::zeros(const SystemShape& shape) {
  shape.validate();
  return ModelState{std::vector<double>(shape.slow_size(), 0.0),
                    std::vector<double>(shape.fast_size(), 0.0), 0.0};
}

void ModelState::check_shape(const SystemShape& shape) const {
  shape.validate();
  if (X.size() != shape.slow_size() || Y.size() != shape.fast_size()) {
    std::ostringstream os;
    os << "ModelState: expected X[" << shape.slow_size() << "], Y[" << shape.fast_size()
       << "], got X[" << X.size() << "], Y[" << Y.size() << "]";
    throw ShapeError(os.str());
  }
}

bool ModelState::all_finite() const {
  return l96cal::all_finite(X) && l96cal::all_finite(Y) && std::isfinite(t);
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("IntegratorConfig: dt must be > 0");
  if (dt > kMaxStableDt) {
    throw std::invalid_argument("IntegratorConfig: dt exceeds stability guard of 0.005 days");
  }
}

namespace {

std::string blow_up_message(long long step, double time, const Params& params) {
  std::ostringstream os;
  os.precision(10);
  os << "integration blow-up at step " << step << ", t=" << time << " days, params "
     << to_string(params);
  return os.str();
}

/// Lorenz-96 advection on a cyclic chain: out[i] = scale * x[i-1] * (x[i+1] - x[i-2])
/// for the slow chain, written generically over index offsets.
inline double slow_advection(std::span<const double> x, std::size_t k, std::size_t n) {
  const std::size_t km1 = (k + n - 1) % n;
  const std::size_t km2 = (k + n - 2) % n;
  const std::size_t kp1 = (k + 1) % n;
  return -x[km1] * (x[km2] - x[kp1]);
}

inline double fast_advection(std::span<const double> y, std::size_t i, std::size_t n, double b) {
  const std::size_t ip1 = (i + 1) % n;
  const std::size_t ip2 = (i + 2) % n;
  const std::size_t im1 = (i + n - 1) % n;
  return -b * y[ip1] * (y[ip2] - y[im1]);
}

// Shared body of the full and conservative tendencies. The interior loops
// avoid modular arithmetic; the few wrap-around indices are handled apart.
template <bool Damped>
void two_scale_tendency(std::span<const double> u, std::span<double> du, const Params& p,
                        const SystemShape& shape) {
  const std::size_t K = shape.slow_size();
  const std::size_t J = static_cast<std::size_t>(shape.J);
  const std::size_t N = shape.fast_size();
  const double* X = u.data();
  const double* Y = u.data() + K;
  double* dX = du.data();
  double* dY = du.data() + K;
  const double hc = p.h * p.c;
  const double coupling = p.h / static_cast<double>(shape.J);
  const double inv_J = 1.0 / static_cast<double>(shape.J);
  const std::span<const double> ys(Y, N);
  const std::span<const double> xs(X, K);

  // Fast chain: dY_n = c*(-b*Y_{n+1}(Y_{n+2}-Y_{n-1}) - Y_n + (h/J) X_{k(n)}).
  for (std::size_t k = 0; k < K; ++k) {
    const double forcing = coupling * X[k];
    const std::size_t lo = k * J;
    const std::size_t hi = lo + J;
    for (std::size_t n = lo; n < hi; ++n) {
      double adv;
      if (n >= 1 && n + 2 < N) {
        adv = -p.b * Y[n + 1] * (Y[n + 2] - Y[n - 1]);
      } else {
        adv = fast_advection(ys, n, N, p.b);
      }
      if constexpr (Damped) {
        dY[n] = p.c * (adv - Y[n] + forcing);
      } else {
        dY[n] = p.c * (adv + forcing);
      }
    }
  }

  for (std::size_t k = 0; k < K; ++k) {
    double ysum = 0.0;
    const double* yk = Y + k * J;
    for (std::size_t j = 0; j < J; ++j) ysum += yk[j];
    const double ybar = ysum * inv_J;
    double adv;
    if (k >= 2 && k + 1 < K) {
      adv = -X[k - 1] * (X[k - 2] - X[k + 1]);
    } else {
      adv = slow_advection(xs, k, K);
    }
    if constexpr (Damped) {
      dX[k] = adv - X[k] + p.F - hc * ybar;
    } else {
      dX[k] = adv - hc * ybar;
    }
  }
}

std::vector<double> pack(const ModelState& s) {
  std::vector<double> u;
  u.reserve(s.X.size() + s.Y.size());
  u.insert(u.end(), s.X.begin(), s.X.end());
  u.insert(u.end(), s.Y.begin(), s.Y.end());
  return u;
}

ModelState unpack(std::span<const double> u, const SystemShape& shape, double t) {
  const std::size_t K = shape.slow_size();
  return ModelState{std::vector<double>(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(K)),
                    std::vector<double>(u.begin() + static_cast<std::ptrdiff_t>(K), u.end()), t};
}

}  // namespace

IntegrationBlowUp::IntegrationBlowUp(long long step, double time, const Params& params)
    : std::runtime_error(blow_up_message(step, time, params)),
      step_(step),
      time_(time),
      params_(params) {}

void full_tendency_flat(std::span<const double> u, std::span<double> du, const Params& p,
                        const SystemShape& shape) {
  two_scale_tendency<true>(u, du, p, shape);
}

void conservative_tendency_flat(std::span<const double> u, std::span<double> du, const Params& p,
                                const SystemShape& shape) {
  two_scale_tendency<false>(u, du, p, shape);
}

void fast_tendency_flat(std::span<const double> y, std::span<double> dy, const Params& p,
                        double x_fixed) {
  const std::size_t J = y.size();
  const double forcing = p.h / static_cast<double>(J) * x_fixed;
  for (std::size_t j = 0; j < J; ++j) {
    dy[j] = p.c * (fast_advection(y, j, J, p.b) - y[j] + forcing);
  }
}

namespace {

StateRate tendency_impl(const ModelState& state, const Params& params, const SystemShape& shape,
                        TendencyMode mode) {
  state.check_shape(shape);
  const auto u = pack(state);
  std::vector<double> du(u.size());
  if (mode == TendencyMode::full) {
    full_tendency_flat(u, du, params, shape);
  } else {
    conservative_tendency_flat(u, du, params, shape);
  }
  const auto K = static_cast<std::ptrdiff_t>(shape.slow_size());
  return StateRate{std::vector<double>(du.begin(), du.begin() + K),
                   std::vector<double>(du.begin() + K, du.end())};
}

}  // namespace

StateRate full_tendency(const ModelState& state, const Params& params, const SystemShape& shape) {
  return tendency_impl(state, params, shape, TendencyMode::full);
}

StateRate conservative_tendency(const ModelState& state, const Params& params,
                                const SystemShape& shape) {
  return tendency_impl(state, params, shape, TendencyMode::conservative);
}

std::vector<double> fast_tendency(std::span<const double> ycol, const Params& params,
                                  double x_fixed) {
  if (ycol.size() < 4) throw ShapeError("fast_tendency: J must be >= 4");
  std::vector<double> dy(ycol.size());
  fast_tendency_flat(ycol, dy, params, x_fixed);
  return dy;
}

long long step_count(double duration, double dt) {
  if (duration < 0.0) throw std::invalid_argument("integrate: duration must be >= 0");
  if (duration == 0.0) return 0;
  const double ratio = duration / dt;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    return static_cast<long long>(nearest);
  }
  return static_cast<long long>(std::ceil(ratio));
}

ModelState step(const ModelState& state, const Params& params, const SystemShape& shape,
                const IntegratorConfig& cfg, TendencyMode mode) {
  cfg.validate();
  state.check_shape(shape);
  auto u = pack(state);
  Rk4Stepper rk(u.size());
  if (mode == TendencyMode::full) {
    rk.step(u, cfg.dt, [&](std::span<const double> x, std::span<double> dx) {
      full_tendency_flat(x, dx, params, shape);
    });
  } else {
    rk.step(u, cfg.dt, [&](std::span<const double> x, std::span<double> dx) {
      conservative_tendency_flat(x, dx, params, shape);
    });
  }
  const double t = state.t + cfg.dt;
  if (!all_finite(u)) throw IntegrationBlowUp(1, t, params);
  return unpack(u, shape, t);
}

namespace {

template <class Rhs>
ModelState integrate_with(const ModelState& state0, const Params& params,
                          const SystemShape& shape, double duration, const IntegratorConfig& cfg,
                          const StateObserver& observer, Rhs&& rhs) {
  cfg.validate();
  state0.check_shape(shape);
  const long long n = step_count(duration, cfg.dt);
  if (n == 0) return state0;
  auto u = pack(state0);
  Rk4Stepper rk(u.size());
  const std::size_t K = shape.slow_size();
  const std::span<const double> xs(u.data(), K);
  const std::span<const double> ys(u.data() + K, shape.fast_size());
  double t = state0.t;
  for (long long i = 1; i <= n; ++i) {
    rk.step(u, cfg.dt, rhs);
    t = state0.t + static_cast<double>(i) * cfg.dt;
    if (!all_finite(u)) throw IntegrationBlowUp(i, t, params);
    if (observer) observer(StateView{xs, ys, t});
  }
  return unpack(u, shape, t);
}

}  // namespace

ModelState integrate(const ModelState& state0, const Params& params, const SystemShape& shape,
                     double duration, const IntegratorConfig& cfg, const StateObserver& observer,
                     TendencyMode mode) {
  if (mode == TendencyMode::full) {
    return integrate_with(state0, params, shape, duration, cfg, observer,
                          [&](std::span<const double> x, std::span<double> dx) {
                            full_tendency_flat(x, dx, params, shape);
                          });
  }
  return integrate_with(state0, params, shape, duration, cfg, observer,
                        [&](std::span<const double> x, std::span<double> dx) {
                          conservative_tendency_flat(x, dx, params, shape);
                        });
}

FastColumnState integrate_fast(const FastColumnState& state0, const Params& params, double x_fixed,
                               double duration, const IntegratorConfig& cfg,
                               const FastObserver& observer) {
  cfg.validate();
  if (state0.Y.size() < 4) throw ShapeError("integrate_fast: J must be >= 4");
  const long long n = step_count(duration, cfg.dt);
  if (n == 0) return state0;
  std::vector<double> y = state0.Y;
  Rk4Stepper rk(y.size());
  auto rhs = [&](std::span<const double> x, std::span<double> dx) {
    fast_tendency_flat(x, dx, params, x_fixed);
  };
  double t = state0.t;
  for (long long i = 1; i <= n; ++i) {
    rk.step(y, cfg.dt, rhs);
    t = state0.t + static_cast<double>(i) * cfg.dt;
    if (!all_finite(y)) throw IntegrationBlowUp(i, t, params);
    if (observer) observer(std::span<const double>(y), t);
  }
  return FastColumnState{std::move(y), t};
}

double total_energy(const ModelState& state) {
  double e = 0.0;
  for (double x : state.X) e += x * x;
  for (double y : state.Y) e += y * y;
  return e;
}

}  // namespace l96cal
