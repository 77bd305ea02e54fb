#pragma once

/// Two-scale Lorenz-96 system: tendencies, fixed-step RK4 integration,
/// fast-only column mode and a conservative (energy-preserving) test mode.
///
/// Slow variables X_k (k = 0..K-1) are stored contiguously; fast variables are
/// stored as a single flat chain Y[k*J + j] so that the cyclic rule
/// Y_{j+J,k} = Y_{j,k+1} becomes plain modular arithmetic on the flat index.

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace l96cal {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SystemShape {
  int K = 36;
  int J = 10;

  /// Throws ShapeError unless K >= 4 and J >= 4.
  void validate() const;
  std::size_t slow_size() const { return static_cast<std::size_t>(K); }
  std::size_t fast_size() const { return static_cast<std::size_t>(K) * static_cast<std::size_t>(J); }
  friend bool operator==(const SystemShape&, const SystemShape&) = default;
};

enum class ParamId : int { F = 0, h = 1, c = 2, b = 3 };
inline constexpr std::array<ParamId, 4> kAllParams{ParamId::F, ParamId::h, ParamId::c, ParamId::b};
inline constexpr std::array<std::string_view, 4> kParamNames{"F", "h", "c", "b"};

std::string_view param_name(ParamId id);
std::optional<ParamId> param_from_name(std::string_view name);

/// Whether a parameter can be learned from local high-resolution runs
/// (computable) or needs global observations (non-computable).
enum class ParamRole { unspecified, computable, non_computable };

struct Params {
  double F = 10.0;
  double h = 1.0;
  double c = 10.0;
  double b = 10.0;
  std::array<ParamRole, 4> roles{};

  double& operator[](ParamId id);
  double operator[](ParamId id) const;
  std::array<double, 4> values() const { return {F, h, c, b}; }
  static Params from_values(const std::array<double, 4>& v);

  /// Reference regime (F, h, c, b) = (10, 1, 10, 10).
  static Params truth() { return {}; }
};

std::string to_string(const Params& p);

struct ModelState {
  std::vector<double> X;  ///< length K
  std::vector<double> Y;  ///< length K*J, Y[k*J + j]
  double t = 0.0;         ///< days

  static ModelState zeros(const SystemShape& shape);
  /// Throws ShapeError if the buffers do not match @p shape.
  void check_shape(const SystemShape& shape) const;
  double& y(const SystemShape& s, int j, int k) { return Y[static_cast<std::size_t>(k * s.J + j)]; }
  double y(const SystemShape& s, int j, int k) const { return Y[static_cast<std::size_t>(k * s.J + j)]; }
  bool all_finite() const;
};

/// Time derivative of a ModelState, same layout.
struct StateRate {
  std::vector<double> dX;
  std::vector<double> dY;
};

/// A single fast chain with Y_{j+J} = Y_j driven by a constant slow value.
struct FastColumnState {
  std::vector<double> Y;
  double t = 0.0;
};

enum class Scheme { rk4 };

struct IntegratorConfig {
  double dt = 1e-3;
  Scheme scheme = Scheme::rk4;

  /// Throws std::invalid_argument for dt <= 0 or dt above the stability guard.
  void validate() const;
  static constexpr double kMaxStableDt = 0.005;
};

/// Thrown when a trajectory produces a non-finite value.
class IntegrationBlowUp : public std::runtime_error {
 public:
  IntegrationBlowUp(long long step, double time, const Params& params);
  long long step() const { return step_; }
  double time() const { return time_; }
  const Params& params() const { return params_; }

 private:
  long long step_;
  double time_;
  Params params_;
};

// Flat kernels. Layout of u: [X_0..X_{K-1}, Y_0..Y_{KJ-1}].

void full_tendency_flat(std::span<const double> u, std::span<double> du, const Params& p,
                        const SystemShape& shape);
void conservative_tendency_flat(std::span<const double> u, std::span<double> du, const Params& p,
                                const SystemShape& shape);
void fast_tendency_flat(std::span<const double> y, std::span<double> dy, const Params& p,
                        double x_fixed);

StateRate full_tendency(const ModelState& state, const Params& params, const SystemShape& shape);
StateRate conservative_tendency(const ModelState& state, const Params& params,
                                const SystemShape& shape);
std::vector<double> fast_tendency(std::span<const double> ycol, const Params& params,
                                  double x_fixed);

/// Read-only view handed to integration observers after every step.
struct StateView {
  std::span<const double> X;
  std::span<const double> Y;
  double t;
};

using StateObserver = std::function<void(const StateView&)>;
using FastObserver = std::function<void(std::span<const double> y, double t)>;

enum class TendencyMode { full, conservative };

/// Number of fixed steps used to cover @p duration: ceil(duration/dt), with
/// round-off slack so that e.g. 100 / 1e-3 yields exactly 100000.
long long step_count(double duration, double dt);

ModelState step(const ModelState& state, const Params& params, const SystemShape& shape,
                const IntegratorConfig& cfg, TendencyMode mode = TendencyMode::full);

ModelState integrate(const ModelState& state0, const Params& params, const SystemShape& shape,
                     double duration, const IntegratorConfig& cfg,
                     const StateObserver& observer = {}, TendencyMode mode = TendencyMode::full);

FastColumnState integrate_fast(const FastColumnState& state0, const Params& params, double x_fixed,
                               double duration, const IntegratorConfig& cfg,
                               const FastObserver& observer = {});

double total_energy(const ModelState& state);

}  // namespace l96cal
