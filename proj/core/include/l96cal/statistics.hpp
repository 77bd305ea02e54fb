#pragma once

/// Moment functions, running time averages and control-run estimates.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "l96cal/dynamics.hpp"

namespace l96cal {

enum class LayoutVariant { full, fast };

/// Fixed ordering of moment entries.
///
/// full: blocks X[k], Ybar[k], X2[k], XYbar[k], Y2bar[k], each of length K.
/// fast: Y[j] for j = 1..J, then YY[j,jp] for j <= jp in row-major order.
/// Labels are 1-based.
class MomentLayout {
 public:
  static MomentLayout full(const SystemShape& shape);
  static MomentLayout fast(int J);

  LayoutVariant variant() const { return variant_; }
  const SystemShape& shape() const { return shape_; }
  std::size_t size() const;
  std::string label(std::size_t index) const;
  std::vector<std::string> labels() const;
  /// Inverse of label(); nullopt for labels not in this layout.
  std::optional<std::size_t> index_of(const std::string& label) const;

  friend bool operator==(const MomentLayout&, const MomentLayout&) = default;

 private:
  MomentLayout(LayoutVariant v, SystemShape s) : variant_(v), shape_(s) {}
  LayoutVariant variant_;
  SystemShape shape_;  // fast layouts use only J
};

enum class FullBlock { X = 0, Ybar = 1, X2 = 2, XYbar = 3, Y2bar = 4 };

/// Instantaneous full-layout moments of a state, written into @p out (length 5K).
void moment_f(std::span<const double> X, std::span<const double> Y, const SystemShape& shape,
              std::span<double> out);
std::vector<double> moment_f(const ModelState& state, const SystemShape& shape);

/// Instantaneous fast-layout moments of a single column, written into @p out.
void moment_g(std::span<const double> ycol, std::span<double> out);
std::vector<double> moment_g(std::span<const double> ycol);

/// Weighted running mean (and optionally second moment) of a moment vector.
class RunningAverage {
 public:
  RunningAverage(MomentLayout layout, double t0 = 0.0, bool track_second_moment = false);

  void accumulate(std::span<const double> sample, double weight);
  /// Combine with an accumulator over an adjacent window.
  void merge(const RunningAverage& other);

  const MomentLayout& layout() const { return layout_; }
  double t0() const { return t0_; }
  double elapsed() const { return elapsed_; }
  bool tracks_second_moment() const { return !second_sum_.empty(); }
  std::span<const double> sums() const { return sum_; }

  /// Throws std::logic_error if nothing has been accumulated.
  std::vector<double> mean() const;
  /// Weighted population variance per entry; requires second-moment tracking.
  std::vector<double> variance() const;

 private:
  MomentLayout layout_;
  double t0_;
  double elapsed_ = 0.0;
  std::vector<double> sum_;
  std::vector<double> second_sum_;
};

struct ControlRunResult {
  std::vector<double> mean;
  std::vector<double> variance;
  double duration = 0.0;
  ModelState final_state;           ///< full layout only
  FastColumnState final_column;     ///< fast layout only
};

/// Where a control run starts. `spinup` days are integrated and discarded
/// before accumulation begins.
struct ControlRunOptions {
  double spinup = 0.0;
  double x_fixed = 0.0;  ///< fast layout only
  std::optional<ModelState> initial_state;
  std::optional<FastColumnState> initial_column;
};

/// Generic initial conditions: X ~ N(0,1), Y = 0 for the full system; Y ~ N(0,1)
/// for a fast column (a constant column is a fixed point of the symmetric dynamics).
ModelState random_initial_state(const SystemShape& shape, std::uint64_t seed);
FastColumnState random_initial_column(int J, std::uint64_t seed);

ControlRunResult control_run_variances(const Params& params_true, double duration,
                                       const MomentLayout& layout, const IntegratorConfig& cfg,
                                       std::uint64_t seed, const ControlRunOptions& opts = {});

/// Average each full-layout block over k.
struct PooledMoments {
  double X, Ybar, X2, XYbar, Y2bar;
};
PooledMoments pool_full(std::span<const double> means, const SystemShape& shape);

/// Replace every full-layout variance entry by the mean of its block.
std::vector<double> pool_block_variances(std::span<const double> variances,
                                         const MomentLayout& layout);

struct SteadyStateResiduals {
  double r_slow;  ///< <X^2> - F<X> + hc<X Ybar>
  double r_fast;  ///< <Y^2bar> - (h/J)<X Ybar>
  double rel_slow;
  double rel_fast;
};

SteadyStateResiduals steady_state_residuals(std::span<const double> means, const Params& params,
                                            const SystemShape& shape);

// CSV with one header row of layout labels.
void write_moment_csv(std::ostream& os, const MomentLayout& layout,
                      const std::vector<std::vector<double>>& rows,
                      const std::vector<std::string>& row_names = {});

struct MomentTable {
  std::vector<std::string> row_names;
  std::vector<std::vector<double>> rows;
};

/// Parse CSV written by write_moment_csv. Throws std::runtime_error on a
/// header that does not match @p layout.
MomentTable read_moment_csv(std::istream& is, const MomentLayout& layout, bool named_rows);

}  // namespace l96cal
