#pragma once

/// Classical fourth-order Runge-Kutta stepping on a flat state buffer.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace l96cal {

/// Reusable RK4 workspace. `Rhs` is any callable
/// `void(std::span<const double> u, std::span<double> du)`.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(std::size_t n) : k1_(n), k2_(n), k3_(n), k4_(n), tmp_(n) {}

  std::size_t size() const { return k1_.size(); }

  template <class Rhs>
  void step(std::span<double> u, double dt, Rhs&& rhs) {
    const std::size_t n = u.size();
    const double half = 0.5 * dt;
    rhs(std::span<const double>(u), std::span<double>(k1_));
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = u[i] + half * k1_[i];
    rhs(std::span<const double>(tmp_), std::span<double>(k2_));
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = u[i] + half * k2_[i];
    rhs(std::span<const double>(tmp_), std::span<double>(k3_));
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = u[i] + dt * k3_[i];
    rhs(std::span<const double>(tmp_), std::span<double>(k4_));
    const double sixth = dt / 6.0;
    for (std::size_t i = 0; i < n; ++i) {
      u[i] += sixth * (k1_[i] + 2.0 * (k2_[i] + k3_[i]) + k4_[i]);
    }
  }

 private:
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

inline bool all_finite(std::span<const double> u) {
  // A single non-finite entry poisons the sum.
  double s = 0.0;
  for (double v : u) s += v * 0.0;
  return s == 0.0;
}

}  // namespace l96cal
