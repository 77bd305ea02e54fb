#pragma once

/// Marginal histograms, quantiles and error norms for calibration output.

#include <span>
#include <vector>

#include "l96cal/dynamics.hpp"

namespace l96cal {

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 entries
  std::vector<double> mass;   ///< sums to 1

  std::size_t bins() const { return mass.size(); }
  /// Centre of the heaviest bin.
  double mode() const;
};

/// Equal-width histogram over [min, max] of @p samples. A degenerate sample
/// (min == max) yields one bin holding all the mass.
Histogram histogram(std::span<const double> samples, int bins);

/// Per-parameter marginals of a retained sample set, in constrained coordinates.
std::vector<Histogram> estimate_posterior_pdf(std::span<const Params> samples,
                                              std::span<const ParamId> ids, int bins);

/// Linear-interpolation quantile (type 7); @p q in [0, 1].
double quantile(std::vector<double> samples, double q);

struct MarginalSummary {
  double mean;
  double std;  ///< sample std (n - 1)
  double q05;
  double q95;
  double mode;
};
MarginalSummary summarize_marginal(std::span<const double> samples, int bins = 30);

std::vector<double> column(std::span<const Params> samples, ParamId id);

/// Euclidean norm of the 4-vector difference in constrained coordinates.
double error_norm(const Params& estimate, const Params& truth);

}  // namespace l96cal
